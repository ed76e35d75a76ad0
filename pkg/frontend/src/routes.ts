// Hash-based page routes. Every page the client can show is one of these;
// parseRoute and routeHash round-trip so deep links and history work.

export type PageRoute =
  | { kind: "main" }
  | { kind: "previous-list" }
  | { kind: "previous-detail"; id: string }
  | { kind: "proposed-list" }
  | { kind: "proposed-detail"; id: string }
  | { kind: "new-idea" }
  | { kind: "student-home" }
  | { kind: "instructor-home" }
  // id "new" renders the same form as a creation page.
  | { kind: "edit-proposed"; id: string }
  | { kind: "pending-queue" }
  | { kind: "current-list" }
  | { kind: "current-detail"; id: string }
  | { kind: "stage-submit"; id: string; stage: string }
  | { kind: "grade-stage"; id: string; stage: string }
  | { kind: "login"; next?: string; notice?: "expired" | "required" }
  | { kind: "register" };

export type RouteGate = "public" | "auth" | "student" | "instructor";

/** Minimum session needed to render the page; mirrors the server's gates. */
export function routeGate(route: PageRoute): RouteGate {
  switch (route.kind) {
    case "main":
    case "previous-list":
    case "previous-detail":
    case "login":
    case "register":
      return "public";
    case "proposed-list":
    case "proposed-detail":
    case "pending-queue":
    case "current-list":
    case "current-detail":
      return "auth";
    case "student-home":
    case "new-idea":
    case "stage-submit":
      return "student";
    case "instructor-home":
    case "edit-proposed":
    case "grade-stage":
      return "instructor";
  }
}

/** Pages with a pending form action get a "cancel" control in the chrome. */
export function routeHasForm(route: PageRoute, role: string | null): boolean {
  switch (route.kind) {
    case "login":
    case "register":
    case "new-idea":
    case "edit-proposed":
    case "stage-submit":
    case "grade-stage":
      return true;
    case "proposed-list":
      // Students see the selection form; instructors just browse.
      return role === "student";
    default:
      return false;
  }
}

export function routeHash(route: PageRoute): string {
  switch (route.kind) {
    case "main":
      return "#/";
    case "previous-list":
      return "#/previous";
    case "previous-detail":
      return `#/previous/${encodeURIComponent(route.id)}`;
    case "proposed-list":
      return "#/proposed";
    case "proposed-detail":
      return `#/proposed/${encodeURIComponent(route.id)}`;
    case "new-idea":
      return "#/ideas/new";
    case "student-home":
      return "#/student";
    case "instructor-home":
      return "#/instructor";
    case "edit-proposed":
      return `#/proposed/${encodeURIComponent(route.id)}/edit`;
    case "pending-queue":
      return "#/pending";
    case "current-list":
      return "#/current";
    case "current-detail":
      return `#/current/${encodeURIComponent(route.id)}`;
    case "stage-submit":
      return `#/current/${encodeURIComponent(route.id)}/stages/${encodeURIComponent(route.stage)}/submit`;
    case "grade-stage":
      return `#/current/${encodeURIComponent(route.id)}/stages/${encodeURIComponent(route.stage)}/grade`;
    case "login": {
      const query = new URLSearchParams();
      if (route.next) query.set("next", route.next);
      if (route.notice) query.set("notice", route.notice);
      const tail = query.toString();
      return tail ? `#/login?${tail}` : "#/login";
    }
    case "register":
      return "#/register";
  }
}

export function parseRoute(hash: string): PageRoute {
  const [path, queryText] = hash.replace(/^#/, "").split("?", 2);
  const parts = (path ?? "").split("/").filter((p) => p.length > 0);
  const seg = (i: number) => decodeURIComponent(parts[i] ?? "");

  if (parts.length === 0) return { kind: "main" };
  switch (parts[0]) {
    case "previous":
      if (parts.length === 1) return { kind: "previous-list" };
      if (parts.length === 2) return { kind: "previous-detail", id: seg(1) };
      break;
    case "proposed":
      if (parts.length === 1) return { kind: "proposed-list" };
      if (parts.length === 2) return { kind: "proposed-detail", id: seg(1) };
      if (parts.length === 3 && parts[2] === "edit")
        return { kind: "edit-proposed", id: seg(1) };
      break;
    case "ideas":
      if (parts.length === 2 && parts[1] === "new") return { kind: "new-idea" };
      break;
    case "student":
      if (parts.length === 1) return { kind: "student-home" };
      break;
    case "instructor":
      if (parts.length === 1) return { kind: "instructor-home" };
      break;
    case "pending":
      if (parts.length === 1) return { kind: "pending-queue" };
      break;
    case "current":
      if (parts.length === 1) return { kind: "current-list" };
      if (parts.length === 2) return { kind: "current-detail", id: seg(1) };
      if (parts.length === 5 && parts[2] === "stages") {
        if (parts[4] === "submit")
          return { kind: "stage-submit", id: seg(1), stage: seg(3) };
        if (parts[4] === "grade")
          return { kind: "grade-stage", id: seg(1), stage: seg(3) };
      }
      break;
    case "login": {
      const query = new URLSearchParams(queryText ?? "");
      const route: PageRoute = { kind: "login" };
      const next = query.get("next");
      if (next) route.next = next;
      const notice = query.get("notice");
      if (notice === "expired" || notice === "required") route.notice = notice;
      return route;
    }
    case "register":
      if (parts.length === 1) return { kind: "register" };
      break;
  }
  return { kind: "main" };
}
