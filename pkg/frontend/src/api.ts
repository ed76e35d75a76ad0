// Thin typed client for the /api routes. Sessions ride in an HttpOnly
// cookie set by the server; this module never sees the token.

export interface UserInfo {
  id: string;
  username: string;
  display_name: string;
  role: "student" | "instructor";
}

export interface GroupInfo {
  id: string;
  name: string;
  members: UserInfo[];
  created_at: number;
}

export interface Me {
  user: UserInfo;
  group: GroupInfo | null;
}

export interface ProjectSummary {
  id: string;
  title: string;
  state: "proposed" | "pending" | "current" | "previous" | "rejected";
  created_at: number;
  state_changed_at: number;
}

export interface CommentInfo {
  instructor_id: string;
  text: string;
  at: number;
}

export interface SubmissionInfo {
  stage: string;
  filename: string;
  size: number;
  sha256: string;
  submitted_by: string;
  submitted_at: number;
  disposed: boolean;
  grade: string | null;
  comments: CommentInfo[];
}

export interface ProjectDetail extends ProjectSummary {
  abstract: string;
  description: string;
  instructor_id: string;
  group: { id: string; name: string } | null;
  rejection_reason?: string;
  submissions?: Record<string, SubmissionInfo>;
  disposed_blobs?: number;
}

export interface StageRow {
  name: string;
  submission: SubmissionInfo | null;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function toError(response: Response): Promise<ApiError> {
  let code = "http_error";
  let message = `request failed with status ${response.status}`;
  try {
    const body = await response.json();
    if (body && typeof body.code === "string") code = body.code;
    if (body && typeof body.message === "string") message = body.message;
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiError(response.status, code, message);
}

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike,
    private readonly baseUrl: string = "",
  ) {}

  blobUrl(sha256: string): string {
    return `${this.baseUrl}/api/blobs/${sha256}`;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "content-type": "application/json" };
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) throw await toError(response);
    return (await response.json()) as T;
  }

  // --- auth -----------------------------------------------------------------

  register(username: string, password: string, displayName: string) {
    return this.request<{ user: UserInfo }>("POST", "/api/auth/register", {
      username,
      password,
      display_name: displayName,
    });
  }

  login(username: string, password: string) {
    return this.request<{ user: UserInfo }>("POST", "/api/auth/login", {
      username,
      password,
    });
  }

  logout() {
    return this.request<{ logged_out: boolean }>("POST", "/api/auth/logout");
  }

  me() {
    return this.request<Me>("GET", "/api/me");
  }

  // --- projects ---------------------------------------------------------------

  listProjects(state: "previous" | "proposed" | "pending" | "current") {
    return this.request<{ projects: ProjectSummary[] }>(
      "GET",
      `/api/projects/${state}`,
    );
  }

  projectDetail(state: "previous" | "proposed" | "current", id: string) {
    return this.request<ProjectDetail>("GET", `/api/projects/${state}/${id}`);
  }

  createProposal(title: string, abstract: string, description: string) {
    return this.request<ProjectDetail>("POST", "/api/projects/proposed", {
      title,
      abstract,
      description,
    });
  }

  editProposal(
    id: string,
    fields: { title?: string; abstract?: string; description?: string },
  ) {
    return this.request<ProjectDetail>(
      "PATCH",
      `/api/projects/proposed/${id}`,
      fields,
    );
  }

  selectProject(id: string) {
    return this.request<ProjectDetail>(
      "POST",
      `/api/projects/proposed/${id}/select`,
    );
  }

  createIdea(title: string, abstract: string, description: string) {
    return this.request<ProjectDetail>("POST", "/api/projects/ideas", {
      title,
      abstract,
      description,
    });
  }

  approvePending(id: string) {
    return this.request<ProjectDetail>(
      "POST",
      `/api/projects/pending/${id}/approve`,
    );
  }

  rejectPending(id: string, reason: string) {
    return this.request<ProjectDetail>(
      "POST",
      `/api/projects/pending/${id}/reject`,
      { reason },
    );
  }

  completeProject(id: string) {
    return this.request<ProjectDetail>(
      "POST",
      `/api/projects/current/${id}/complete`,
    );
  }

  // --- stages ------------------------------------------------------------------

  stages(projectId: string) {
    return this.request<{ stages: StageRow[] }>(
      "GET",
      `/api/projects/current/${projectId}/stages`,
    );
  }

  async uploadStage(
    projectId: string,
    stage: string,
    file: File,
  ): Promise<SubmissionInfo> {
    const form = new FormData();
    form.append("report", file, file.name);
    const response = await this.fetchFn(
      `${this.baseUrl}/api/projects/current/${projectId}/stages/${stage}/submission`,
      { method: "POST", body: form },
    );
    if (!response.ok) throw await toError(response);
    return (await response.json()) as SubmissionInfo;
  }

  gradeStage(projectId: string, stage: string, grade: string, comment: string) {
    const body: Record<string, string> = { grade };
    if (comment) body.comment = comment;
    return this.request<SubmissionInfo>(
      "POST",
      `/api/projects/current/${projectId}/stages/${stage}/grade`,
      body,
    );
  }

  // --- groups -------------------------------------------------------------------

  createGroup(name: string, members: string[]) {
    return this.request<GroupInfo>("POST", "/api/groups", { name, members });
  }

  myGroup() {
    return this.request<{ group: GroupInfo | null }>("GET", "/api/groups/mine");
  }
}

/** Grade strings the grade form accepts: 0.0 to 100.0, at most one decimal. */
export function validateGrade(text: string): string | null {
  const trimmed = text.trim();
  if (!/^\d{1,3}(\.\d)?$/.test(trimmed)) {
    return "Enter a grade like 85.5 (one decimal place at most).";
  }
  const value = Number(trimmed);
  if (value < 0 || value > 100) {
    return "Grade must be between 0.0 and 100.0.";
  }
  return null;
}
