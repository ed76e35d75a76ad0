// One render function per page route. Pages fetch what they need, build
// plain DOM, and wire handlers through the app context; they never touch
// session state or the route stack directly.

import {
  ApiClient,
  ApiError,
  Me,
  ProjectDetail,
  ProjectSummary,
  StageRow,
  SubmissionInfo,
  validateGrade,
} from "./api.js";
import { PageRoute, parseRoute, routeHash } from "./routes.js";
import { Dom, fmtSize, fmtTime } from "./ui.js";

export interface PageContext {
  dom: Dom;
  api: ApiClient;
  session: Me | null;
  goto(route: PageRoute): void;
  back(): void;
  run(task: () => Promise<void>): void;
  refresh(): void;
  sessionRefresh(): Promise<void>;
}

function link(
  ctx: PageContext,
  route: PageRoute,
  text: string,
  attrs: Record<string, string> = {},
): HTMLElement {
  return ctx.dom.el(
    "a",
    {
      href: routeHash(route),
      ...attrs,
      onclick: (event: Event) => {
        event.preventDefault();
        ctx.goto(route);
      },
    },
    text,
  );
}

function field(
  ctx: PageContext,
  labelText: string,
  input: HTMLElement,
  errorKey?: string,
): HTMLElement {
  const { dom } = ctx;
  return dom.el(
    "div",
    { class: "field" },
    dom.el("label", {}, labelText),
    input,
    errorKey
      ? dom.el("span", { class: "field-error", "data-error": errorKey })
      : null,
  );
}

function setFieldError(page: HTMLElement, key: string, text: string): void {
  const span = page.querySelector(`[data-error="${key}"]`);
  if (span) span.textContent = text;
}

function clearFieldErrors(page: HTMLElement): void {
  for (const span of page.querySelectorAll("[data-error]")) {
    span.textContent = "";
  }
}

function inputValue(page: HTMLElement, name: string): string {
  const input = page.querySelector(`[name="${name}"]`) as
    | HTMLInputElement
    | HTMLTextAreaElement
    | null;
  return input ? input.value : "";
}

/** Swap the contents of the page's banner area for a single banner. */
function showBanner(
  ctx: PageContext,
  page: HTMLElement,
  kind: "error" | "info" | "success",
  text: string,
): void {
  const area = page.querySelector("[data-banner-area]");
  if (!area) return;
  area.innerHTML = "";
  area.append(ctx.dom.banner(kind, text));
}

const FRIENDLY: Record<string, string> = {
  duplicate_title: "That title is already used by another project.",
  invalid_credentials: "Username or password is incorrect.",
  username_taken: "That username is already taken.",
  weak_password: "Password must be at least 8 characters.",
  infected_file: "The uploaded file failed the virus scan and was rejected.",
  too_large: "That file is larger than the allowed upload size.",
  stage_locked: "This stage has been graded; uploads are locked.",
  no_group: "You need a group before you can do that.",
  group_busy: "Your group already has an active project.",
  conflict: "Someone else got there first; the page has been refreshed.",
  invalid_state: "That project is no longer in a state that allows this.",
};

export function friendlyMessage(error: ApiError): string {
  return FRIENDLY[error.code] ?? "Something went wrong talking to the server.";
}

// --- public pages ------------------------------------------------------------

function pageMain(ctx: PageContext): HTMLElement {
  const { dom, session } = ctx;
  const items: HTMLElement[] = [
    link(ctx, { kind: "previous-list" }, "Previous Projects", {
      "data-link": "previous",
    }),
  ];
  if (session === null) {
    items.push(
      link(ctx, { kind: "login" }, "Sign in", { "data-link": "login" }),
      link(ctx, { kind: "register" }, "Register", { "data-link": "register" }),
    );
  } else {
    const home: PageRoute =
      session.user.role === "instructor"
        ? { kind: "instructor-home" }
        : { kind: "student-home" };
    items.push(link(ctx, home, "Your home page", { "data-link": "home-page" }));
  }
  return dom.el(
    "div",
    {},
    dom.el("h1", {}, "Senior Projects"),
    dom.el(
      "p",
      {},
      "Browse completed senior projects, or sign in to take part in this year's projects.",
    ),
    dom.el("nav", { class: "main-nav" }, ...items),
  );
}

async function pagePreviousList(ctx: PageContext): Promise<HTMLElement> {
  const { dom } = ctx;
  const { projects } = await ctx.api.listProjects("previous");
  const body =
    projects.length === 0
      ? dom.el("p", { "data-empty": "" }, "No previous projects yet.")
      : dom.el(
          "ul",
          { "data-list": "previous" },
          ...projects.map((p) =>
            dom.el(
              "li",
              {},
              link(ctx, { kind: "previous-detail", id: p.id }, p.title, {
                "data-project-id": p.id,
              }),
            ),
          ),
        );
  return dom.el("div", {}, dom.el("h2", {}, "Previous Projects"), body);
}

function submissionCells(
  ctx: PageContext,
  sub: SubmissionInfo,
  withDownload: boolean,
): HTMLElement[] {
  const { dom } = ctx;
  const fileCell = dom.el("td", {});
  if (sub.disposed) {
    dom.append(fileCell, [
      `${sub.filename} `,
      dom.el("em", { "data-disposed": sub.stage }, "(file disposed)"),
    ]);
  } else if (withDownload) {
    fileCell.append(
      dom.el(
        "a",
        { href: ctx.api.blobUrl(sub.sha256), "data-download": sub.stage },
        sub.filename,
      ),
    );
  } else {
    fileCell.append(sub.filename);
  }
  dom.append(fileCell, [` ${fmtSize(sub.size)}, ${fmtTime(sub.submitted_at)}`]);
  const gradeCell = dom.el(
    "td",
    {},
    dom.el(
      "span",
      { "data-grade": sub.stage },
      sub.grade === null ? "not graded" : sub.grade,
    ),
    dom.el(
      "ul",
      { class: "comments", "data-comments": sub.stage },
      ...sub.comments.map((c) =>
        dom.el("li", {}, `${c.text} (${fmtTime(c.at)})`),
      ),
    ),
  );
  return [fileCell, gradeCell];
}

async function pagePreviousDetail(
  ctx: PageContext,
  id: string,
): Promise<HTMLElement> {
  const { dom } = ctx;
  const project = await ctx.api.projectDetail("previous", id);
  const submissions = Object.values(project.submissions ?? {}).sort((a, b) =>
    a.stage.localeCompare(b.stage),
  );
  const rows = submissions.map((sub) =>
    dom.el(
      "tr",
      { "data-stage": sub.stage },
      dom.el("td", {}, sub.stage),
      ...submissionCells(ctx, sub, false),
    ),
  );
  return dom.el(
    "div",
    {},
    dom.el("h2", {}, project.title),
    dom.el(
      "p",
      { "data-field": "group" },
      `Group: ${project.group ? project.group.name : "(none)"}`,
    ),
    dom.el("p", {}, `Completed ${fmtTime(project.state_changed_at)}`),
    dom.el("h3", {}, "Abstract"),
    dom.el("p", { "data-field": "abstract" }, project.abstract),
    dom.el("h3", {}, "Description"),
    dom.el("p", { "data-field": "description" }, project.description),
    dom.el("h3", {}, "Submitted work"),
    submissions.length === 0
      ? dom.el("p", { "data-empty": "" }, "No files were submitted.")
      : dom.el(
          "table",
          {},
          dom.el(
            "tr",
            {},
            dom.el("th", {}, "Stage"),
            dom.el("th", {}, "File"),
            dom.el("th", {}, "Grade and comments"),
          ),
          ...rows,
        ),
  );
}

function pageLogin(
  ctx: PageContext,
  route: Extract<PageRoute, { kind: "login" }>,
): HTMLElement {
  const { dom } = ctx;
  const notice =
    route.notice === "expired"
      ? dom.banner("info", "Your session expired. Please sign in again.")
      : route.notice === "required"
        ? dom.banner("info", "Please sign in to continue.")
        : null;
  const page = dom.el(
    "div",
    {},
    dom.el("h2", {}, "Sign in"),
    notice,
    dom.el("div", { "data-banner-area": "" }),
    field(ctx, "Username", dom.el("input", { name: "username" })),
    field(
      ctx,
      "Password",
      dom.el("input", { name: "password", type: "password" }),
    ),
    dom.el(
      "button",
      {
        "data-action": "login",
        onclick: () =>
          ctx.run(async () => {
            try {
              await ctx.api.login(
                inputValue(page, "username"),
                inputValue(page, "password"),
              );
            } catch (error) {
              if (error instanceof ApiError) {
                showBanner(ctx, page, "error", friendlyMessage(error));
                return;
              }
              throw error;
            }
            await ctx.sessionRefresh();
            const me = ctx.session;
            if (route.next) {
              ctx.goto(parseNext(route.next));
            } else if (me && me.user.role === "instructor") {
              ctx.goto({ kind: "instructor-home" });
            } else {
              ctx.goto({ kind: "student-home" });
            }
          }),
      },
      "Sign in",
    ),
    dom.el(
      "p",
      {},
      "No account yet? ",
      link(ctx, { kind: "register" }, "Register", { "data-link": "register" }),
    ),
  );
  return page;
}

/** The login "next" target is stored as a hash string in the URL. */
function parseNext(next: string): PageRoute {
  return next.startsWith("#") ? parseRoute(next) : { kind: "main" };
}

function pageRegister(ctx: PageContext): HTMLElement {
  const { dom } = ctx;
  const page = dom.el(
    "div",
    {},
    dom.el("h2", {}, "Register"),
    dom.el("div", { "data-banner-area": "" }),
    field(
      ctx,
      "Username",
      dom.el("input", { name: "username" }),
      "username",
    ),
    field(
      ctx,
      "Display name",
      dom.el("input", { name: "display_name" }),
    ),
    field(
      ctx,
      "Password (at least 8 characters)",
      dom.el("input", { name: "password", type: "password" }),
      "password",
    ),
    dom.el(
      "button",
      {
        "data-action": "register",
        onclick: () =>
          ctx.run(async () => {
            clearFieldErrors(page);
            const username = inputValue(page, "username");
            const password = inputValue(page, "password");
            try {
              await ctx.api.register(
                username,
                password,
                inputValue(page, "display_name"),
              );
              await ctx.api.login(username, password);
            } catch (error) {
              if (error instanceof ApiError) {
                if (error.code === "username_taken") {
                  setFieldError(page, "username", friendlyMessage(error));
                } else if (error.code === "weak_password") {
                  setFieldError(page, "password", friendlyMessage(error));
                } else {
                  showBanner(ctx, page, "error", friendlyMessage(error));
                }
                return;
              }
              throw error;
            }
            await ctx.sessionRefresh();
            ctx.goto({ kind: "student-home" });
          }),
      },
      "Create account",
    ),
  );
  return page;
}

// --- home pages ----------------------------------------------------------------

function pageStudentHome(ctx: PageContext): HTMLElement {
  const { dom, session } = ctx;
  const me = session as Me;
  const groupBox = dom.el("div", { "data-section": "group" });
  if (me.group) {
    dom.append(groupBox, [
      dom.el("h3", {}, `Group: ${me.group.name}`),
      dom.el(
        "ul",
        {},
        ...me.group.members.map((m) =>
          dom.el("li", {}, `${m.display_name || m.username} (${m.username})`),
        ),
      ),
    ]);
  } else {
    const form = dom.el(
      "div",
      { class: "form-box" },
      dom.el("p", {}, "You are not in a group yet. Create one to take part."),
      field(ctx, "Group name", dom.el("input", { name: "group-name" })),
      field(
        ctx,
        "Other members (usernames, comma separated)",
        dom.el("input", { name: "group-members" }),
        "group",
      ),
      dom.el(
        "button",
        {
          "data-action": "create-group",
          onclick: () =>
            ctx.run(async () => {
              clearFieldErrors(groupBox as HTMLElement);
              const members = inputValue(groupBox, "group-members")
                .split(",")
                .map((m) => m.trim())
                .filter((m) => m.length > 0);
              // The creator is always a member; the field lists the others.
              const self = me.user.username;
              if (!members.some((m) => m.toLowerCase() === self.toLowerCase())) {
                members.unshift(self);
              }
              try {
                await ctx.api.createGroup(
                  inputValue(groupBox, "group-name"),
                  members,
                );
              } catch (error) {
                if (error instanceof ApiError) {
                  setFieldError(groupBox, "group", friendlyMessage(error));
                  return;
                }
                throw error;
              }
              await ctx.sessionRefresh();
              ctx.refresh();
            }),
        },
        "Create group",
      ),
    );
    groupBox.append(form);
  }
  return dom.el(
    "div",
    {},
    dom.el("h2", {}, `Hello, ${me.user.display_name || me.user.username}`),
    groupBox,
    dom.el(
      "nav",
      { class: "main-nav" },
      link(ctx, { kind: "proposed-list" }, "Browse proposed projects", {
        "data-link": "proposed",
      }),
      link(ctx, { kind: "new-idea" }, "Pitch a new idea", {
        "data-link": "new-idea",
      }),
      link(ctx, { kind: "pending-queue" }, "Ideas waiting for approval", {
        "data-link": "pending",
      }),
      link(ctx, { kind: "current-list" }, "Current projects", {
        "data-link": "current",
      }),
      link(ctx, { kind: "previous-list" }, "Previous projects", {
        "data-link": "previous",
      }),
    ),
  );
}

function pageInstructorHome(ctx: PageContext): HTMLElement {
  const { dom, session } = ctx;
  const me = session as Me;
  return dom.el(
    "div",
    {},
    dom.el("h2", {}, `Hello, ${me.user.display_name || me.user.username}`),
    dom.el(
      "nav",
      { class: "main-nav" },
      link(ctx, { kind: "pending-queue" }, "Review pending ideas", {
        "data-link": "pending",
      }),
      link(ctx, { kind: "proposed-list" }, "Proposed projects", {
        "data-link": "proposed",
      }),
      link(
        ctx,
        { kind: "edit-proposed", id: "new" },
        "Publish a new proposal",
        { "data-link": "new-proposal" },
      ),
      link(ctx, { kind: "current-list" }, "Current projects", {
        "data-link": "current",
      }),
      link(ctx, { kind: "previous-list" }, "Previous projects", {
        "data-link": "previous",
      }),
    ),
  );
}

// --- proposals -------------------------------------------------------------------

async function pageProposedList(ctx: PageContext): Promise<HTMLElement> {
  const { dom, session } = ctx;
  const isStudent = session?.user.role === "student";
  const page = dom.el("div", {}, dom.el("h2", {}, "Proposed Projects"));
  page.append(dom.el("div", { "data-banner-area": "" }));
  const listArea = dom.el("div", { "data-list-area": "" });
  page.append(listArea);

  let selected: string | null = null;

  const buildRows = (projects: ProjectSummary[]): HTMLElement => {
    if (projects.length === 0) {
      return dom.el("p", { "data-empty": "" }, "No proposed projects right now.");
    }
    const rows = projects.map((p) => {
      const row = dom.el("div", { class: "row", "data-project-id": p.id });
      if (isStudent) {
        row.append(
          dom.el("input", {
            type: "checkbox",
            "data-select": p.id,
            onchange: (event: Event) => {
              const box = event.target as HTMLInputElement;
              if (box.checked) {
                selected = p.id;
                // Single selection: checking one clears the others.
                for (const other of listArea.querySelectorAll("[data-select]")) {
                  if (other !== box) (other as HTMLInputElement).checked = false;
                }
              } else if (selected === p.id) {
                selected = null;
              }
              const submit = page.querySelector(
                '[data-action="select"]',
              ) as HTMLButtonElement | null;
              if (submit) submit.disabled = selected === null;
            },
          }),
        );
      }
      row.append(
        link(ctx, { kind: "proposed-detail", id: p.id }, p.title, {
          "data-project-id": p.id,
        }),
      );
      if (session?.user.role === "instructor") {
        row.append(
          " ",
          link(ctx, { kind: "edit-proposed", id: p.id }, "Edit", {
            "data-edit": p.id,
          }),
        );
      }
      return row;
    });
    return dom.el("div", {}, ...rows);
  };

  const reload = async (): Promise<void> => {
    const { projects } = await ctx.api.listProjects("proposed");
    selected = null;
    const submit = page.querySelector(
      '[data-action="select"]',
    ) as HTMLButtonElement | null;
    if (submit) submit.disabled = true;
    listArea.innerHTML = "";
    listArea.append(buildRows(projects));
  };

  await reload();

  if (isStudent) {
    page.append(
      dom.el(
        "button",
        {
          "data-action": "select",
          disabled: true,
          onclick: () =>
            ctx.run(async () => {
              if (selected === null) return;
              try {
                const project = await ctx.api.selectProject(selected);
                ctx.goto({ kind: "current-detail", id: project.id });
              } catch (error) {
                if (error instanceof ApiError && error.status === 409) {
                  const text =
                    error.code === "conflict" || error.code === "invalid_state"
                      ? "That project was just taken by another group."
                      : friendlyMessage(error);
                  showBanner(ctx, page, "error", text);
                  await reload();
                  return;
                }
                throw error;
              }
            }),
        },
        "Select this project",
      ),
      dom.el(
        "p",
        {},
        "Have your own idea instead? ",
        link(ctx, { kind: "new-idea" }, "Pitch a new idea", {
          "data-link": "new-idea",
        }),
      ),
    );
  }
  return page;
}

async function pageProposedDetail(
  ctx: PageContext,
  id: string,
): Promise<HTMLElement> {
  const { dom, session } = ctx;
  const project = await ctx.api.projectDetail("proposed", id);
  const page = dom.el(
    "div",
    {},
    dom.el("h2", {}, project.title),
    dom.el("div", { "data-banner-area": "" }),
    dom.el("p", {}, `Proposed ${fmtTime(project.created_at)}`),
    dom.el("h3", {}, "Abstract"),
    dom.el("p", { "data-field": "abstract" }, project.abstract),
    dom.el("h3", {}, "Description"),
    dom.el("p", { "data-field": "description" }, project.description),
  );
  if (session?.user.role === "student") {
    page.append(
      dom.el(
        "button",
        {
          "data-action": "select",
          onclick: () =>
            ctx.run(async () => {
              try {
                const current = await ctx.api.selectProject(id);
                ctx.goto({ kind: "current-detail", id: current.id });
              } catch (error) {
                if (error instanceof ApiError && error.status === 409) {
                  showBanner(ctx, page, "error", friendlyMessage(error));
                  return;
                }
                throw error;
              }
            }),
        },
        "Select this project",
      ),
    );
  }
  if (session?.user.role === "instructor") {
    page.append(
      link(ctx, { kind: "edit-proposed", id }, "Edit this proposal", {
        "data-edit": id,
      }),
    );
  }
  return page;
}

function proposalForm(
  ctx: PageContext,
  page: HTMLElement,
  initial: { title: string; abstract: string; description: string },
  submitLabel: string,
  onSubmit: (fields: {
    title: string;
    abstract: string;
    description: string;
  }) => Promise<void>,
): HTMLElement {
  const { dom } = ctx;
  const titleInput = dom.el("input", { name: "title" }) as HTMLInputElement;
  titleInput.value = initial.title;
  const abstractInput = dom.el("textarea", {
    name: "abstract",
  }) as HTMLTextAreaElement;
  abstractInput.value = initial.abstract;
  const descriptionInput = dom.el("textarea", {
    name: "description",
  }) as HTMLTextAreaElement;
  descriptionInput.value = initial.description;
  return dom.el(
    "div",
    { class: "form-box" },
    field(ctx, "Title", titleInput, "title"),
    field(ctx, "Abstract", abstractInput),
    field(ctx, "Description", descriptionInput),
    dom.el(
      "button",
      {
        "data-action": "submit-proposal",
        onclick: () =>
          ctx.run(async () => {
            clearFieldErrors(page);
            try {
              await onSubmit({
                title: titleInput.value,
                abstract: abstractInput.value,
                description: descriptionInput.value,
              });
            } catch (error) {
              if (error instanceof ApiError) {
                if (error.code === "duplicate_title") {
                  setFieldError(page, "title", friendlyMessage(error));
                } else if (error.code === "validation_error") {
                  setFieldError(page, "title", error.message);
                } else {
                  showBanner(ctx, page, "error", friendlyMessage(error));
                }
                return;
              }
              throw error;
            }
          }),
      },
      submitLabel,
    ),
  );
}

function pageNewIdea(ctx: PageContext): HTMLElement {
  const { dom } = ctx;
  const page = dom.el(
    "div",
    {},
    dom.el("h2", {}, "Pitch a New Idea"),
    dom.el("div", { "data-banner-area": "" }),
    dom.el(
      "p",
      {},
      "Describe the project your group wants to do. The course instructor reviews every idea.",
    ),
  );
  const form = proposalForm(
    ctx,
    page,
    { title: "", abstract: "", description: "" },
    "Submit for approval",
    async (fields) => {
      await ctx.api.createIdea(
        fields.title,
        fields.abstract,
        fields.description,
      );
      form.remove();
      showBanner(
        ctx,
        page,
        "success",
        "Idea submitted. Waiting for instructor approval.",
      );
      page.append(
        ctx.dom.el(
          "p",
          {},
          link(ctx, { kind: "pending-queue" }, "See your pending ideas", {
            "data-link": "pending",
          }),
        ),
      );
    },
  );
  page.append(form);
  return page;
}

async function pageEditProposed(
  ctx: PageContext,
  id: string,
): Promise<HTMLElement> {
  const { dom } = ctx;
  const creating = id === "new";
  const initial = creating
    ? { title: "", abstract: "", description: "" }
    : await ctx.api.projectDetail("proposed", id);
  const page = dom.el(
    "div",
    {},
    dom.el("h2", {}, creating ? "New Proposal" : "Edit Proposal"),
    dom.el("div", { "data-banner-area": "" }),
  );
  page.append(
    proposalForm(
      ctx,
      page,
      {
        title: initial.title,
        abstract: initial.abstract,
        description: initial.description,
      },
      creating ? "Publish proposal" : "Save changes",
      async (fields) => {
        const saved = creating
          ? await ctx.api.createProposal(
              fields.title,
              fields.abstract,
              fields.description,
            )
          : await ctx.api.editProposal(id, fields);
        ctx.goto({ kind: "proposed-detail", id: saved.id });
      },
    ),
  );
  return page;
}

// --- pending review ---------------------------------------------------------------

async function pagePendingQueue(ctx: PageContext): Promise<HTMLElement> {
  const { dom, session } = ctx;
  const isInstructor = session?.user.role === "instructor";
  const page = dom.el(
    "div",
    {},
    dom.el("h2", {}, isInstructor ? "Ideas Awaiting Review" : "Pending Ideas"),
    dom.el("div", { "data-banner-area": "" }),
  );
  const listArea = dom.el("div", { "data-list-area": "" });
  page.append(listArea);

  const reload = async (): Promise<void> => {
    const { projects } = await ctx.api.listProjects("pending");
    listArea.innerHTML = "";
    if (projects.length === 0) {
      listArea.append(
        dom.el("p", { "data-empty": "" }, "Nothing is waiting for review."),
      );
      return;
    }
    for (const p of projects) {
      const row = dom.el(
        "div",
        { class: "row", "data-project-id": p.id },
        dom.el("strong", {}, p.title),
        ` (submitted ${fmtTime(p.created_at)}) `,
      );
      if (!isInstructor) {
        row.append(
          dom.el(
            "span",
            { "data-status": p.id },
            "waiting for instructor approval",
          ),
        );
      } else {
        const reasonBox = dom.el("span", {});
        row.append(
          dom.el(
            "button",
            {
              "data-action": "approve",
              "data-id": p.id,
              onclick: () =>
                ctx.run(async () => {
                  await ctx.api.approvePending(p.id);
                  showBanner(
                    ctx,
                    page,
                    "success",
                    `Approved "${p.title}"; it is now a current project.`,
                  );
                  await reload();
                }),
            },
            "Approve",
          ),
          dom.el(
            "button",
            {
              "data-action": "reject",
              "data-id": p.id,
              onclick: () => {
                reasonBox.innerHTML = "";
                const reason = dom.el("input", {
                  name: "reason",
                  "data-reason": p.id,
                  placeholder: "reason for rejection",
                });
                reasonBox.append(
                  reason,
                  dom.el(
                    "button",
                    {
                      "data-action": "confirm-reject",
                      "data-id": p.id,
                      onclick: () =>
                        ctx.run(async () => {
                          const text = (reason as HTMLInputElement).value.trim();
                          if (!text) {
                            showBanner(
                              ctx,
                              page,
                              "error",
                              "A rejection needs a reason the group will see.",
                            );
                            return;
                          }
                          await ctx.api.rejectPending(p.id, text);
                          showBanner(ctx, page, "info", `Rejected "${p.title}".`);
                          await reload();
                        }),
                    },
                    "Confirm reject",
                  ),
                  dom.el(
                    "button",
                    {
                      "data-action": "cancel-reject",
                      onclick: () => {
                        reasonBox.innerHTML = "";
                      },
                    },
                    "Keep it",
                  ),
                );
              },
            },
            "Reject",
          ),
          reasonBox,
        );
      }
      listArea.append(row);
    }
  };

  await reload();
  return page;
}

// --- current projects ----------------------------------------------------------------

async function pageCurrentList(ctx: PageContext): Promise<HTMLElement> {
  const { dom } = ctx;
  const { projects } = await ctx.api.listProjects("current");
  const body =
    projects.length === 0
      ? dom.el("p", { "data-empty": "" }, "No current projects.")
      : dom.el(
          "ul",
          { "data-list": "current" },
          ...projects.map((p) =>
            dom.el(
              "li",
              {},
              link(ctx, { kind: "current-detail", id: p.id }, p.title, {
                "data-project-id": p.id,
              }),
            ),
          ),
        );
  return dom.el("div", {}, dom.el("h2", {}, "Current Projects"), body);
}

async function pageCurrentDetail(
  ctx: PageContext,
  id: string,
): Promise<HTMLElement> {
  const { dom, session } = ctx;
  const project = await ctx.api.projectDetail("current", id);
  const { stages } = await ctx.api.stages(id);
  const isInstructor = session?.user.role === "instructor";
  const isMember =
    session?.user.role === "student" &&
    session.group !== null &&
    project.group !== null &&
    session.group.id === project.group.id;

  const rows = stages.map((row: StageRow) => {
    const tr = dom.el("tr", { "data-stage": row.name });
    tr.append(dom.el("td", {}, row.name));
    if (row.submission) {
      tr.append(...submissionCells(ctx, row.submission, true));
    } else {
      tr.append(
        dom.el("td", {}, "not submitted"),
        dom.el(
          "td",
          {},
          dom.el("span", { "data-grade": row.name }, "not graded"),
        ),
      );
    }
    const actions = dom.el("td", {});
    if (isMember) {
      if (row.submission && row.submission.grade !== null) {
        actions.append(
          dom.el(
            "span",
            { "data-locked": row.name },
            "locked: this stage has been graded",
          ),
        );
      } else {
        actions.append(
          link(
            ctx,
            { kind: "stage-submit", id, stage: row.name },
            row.submission ? "Replace upload" : "Upload",
            { "data-upload": row.name },
          ),
        );
      }
    }
    if (isInstructor && row.submission) {
      actions.append(
        link(
          ctx,
          { kind: "grade-stage", id, stage: row.name },
          row.submission.grade === null ? "Grade" : "Re-grade",
          { "data-grade-link": row.name },
        ),
      );
    }
    tr.append(actions);
    return tr;
  });

  const page = dom.el(
    "div",
    {},
    dom.el("h2", {}, project.title),
    dom.el("div", { "data-banner-area": "" }),
    dom.el(
      "p",
      { "data-field": "group" },
      `Group: ${project.group ? project.group.name : "(none)"}`,
    ),
    dom.el("h3", {}, "Abstract"),
    dom.el("p", { "data-field": "abstract" }, project.abstract),
    dom.el("h3", {}, "Stages"),
    dom.el(
      "table",
      {},
      dom.el(
        "tr",
        {},
        dom.el("th", {}, "Stage"),
        dom.el("th", {}, "Submission"),
        dom.el("th", {}, "Grade and comments"),
        dom.el("th", {}, "Actions"),
      ),
      ...rows,
    ),
  );
  if (isInstructor) {
    page.append(
      dom.el(
        "button",
        {
          "data-action": "complete",
          onclick: () =>
            ctx.run(async () => {
              try {
                await ctx.api.completeProject(id);
              } catch (error) {
                if (error instanceof ApiError && error.status === 409) {
                  showBanner(ctx, page, "error", friendlyMessage(error));
                  return;
                }
                throw error;
              }
              ctx.goto({ kind: "previous-detail", id });
            }),
        },
        "Mark completed",
      ),
    );
  }
  return page;
}

async function pageStageSubmit(
  ctx: PageContext,
  id: string,
  stage: string,
): Promise<HTMLElement> {
  const { dom } = ctx;
  const { stages } = await ctx.api.stages(id);
  const row = stages.find((r) => r.name === stage);
  const page = dom.el(
    "div",
    {},
    dom.el("h2", {}, `Upload: ${stage}`),
    dom.el("div", { "data-banner-area": "" }),
  );
  if (!row) {
    showBanner(ctx, page, "error", "This project has no such stage.");
    return page;
  }
  if (row.submission && row.submission.grade !== null) {
    page.append(
      dom.el(
        "p",
        { "data-locked": stage },
        "This stage has been graded; uploads are locked.",
      ),
    );
    return page;
  }
  if (row.submission) {
    page.append(
      dom.el(
        "p",
        {},
        `A new upload will replace ${row.submission.filename} (${fmtTime(
          row.submission.submitted_at,
        )}).`,
      ),
    );
  }
  let chosen: File | null = null;
  const fileInput = dom.el("input", {
    type: "file",
    name: "report",
    onchange: (event: Event) => {
      const input = event.target as HTMLInputElement;
      chosen = input.files && input.files.length > 0 ? input.files[0]! : null;
      const submit = page.querySelector(
        '[data-action="upload"]',
      ) as HTMLButtonElement | null;
      if (submit) submit.disabled = chosen === null;
    },
  });
  page.append(
    field(ctx, "Report file", fileInput),
    dom.el(
      "button",
      {
        "data-action": "upload",
        disabled: true,
        onclick: () =>
          ctx.run(async () => {
            if (chosen === null) return;
            try {
              await ctx.api.uploadStage(id, stage, chosen);
            } catch (error) {
              if (error instanceof ApiError && error.status !== 401) {
                showBanner(ctx, page, "error", friendlyMessage(error));
                return;
              }
              throw error;
            }
            ctx.goto({ kind: "current-detail", id });
          }),
      },
      "Submit",
    ),
  );
  return page;
}

async function pageGradeStage(
  ctx: PageContext,
  id: string,
  stage: string,
): Promise<HTMLElement> {
  const { dom } = ctx;
  const { stages } = await ctx.api.stages(id);
  const row = stages.find((r) => r.name === stage);
  const page = dom.el(
    "div",
    {},
    dom.el("h2", {}, `Grade: ${stage}`),
    dom.el("div", { "data-banner-area": "" }),
  );
  if (!row || row.submission === null) {
    showBanner(ctx, page, "error", "Nothing has been submitted for this stage yet.");
    return page;
  }
  const sub = row.submission;
  const gradeInput = dom.el("input", { name: "grade" }) as HTMLInputElement;
  if (sub.grade !== null) gradeInput.value = sub.grade;
  const commentInput = dom.el("textarea", {
    name: "comment",
  }) as HTMLTextAreaElement;
  dom.append(page, [
    dom.el(
      "p",
      {},
      "Submitted file: ",
      dom.el(
        "a",
        { href: ctx.api.blobUrl(sub.sha256), "data-download": stage },
        sub.filename,
      ),
      ` (${fmtSize(sub.size)}, ${fmtTime(sub.submitted_at)})`,
    ),
    sub.grade !== null
      ? dom.el("p", {}, `Current grade: ${sub.grade} (grading again replaces it)`)
      : null,
    field(ctx, "Grade (0.0 to 100.0)", gradeInput, "grade"),
    field(ctx, "Comment for the group", commentInput),
    dom.el(
      "button",
      {
        "data-action": "grade",
        onclick: () =>
          ctx.run(async () => {
            clearFieldErrors(page);
            const problem = validateGrade(gradeInput.value);
            if (problem !== null) {
              setFieldError(page, "grade", problem);
              return;
            }
            try {
              await ctx.api.gradeStage(
                id,
                stage,
                gradeInput.value.trim(),
                commentInput.value.trim(),
              );
            } catch (error) {
              if (error instanceof ApiError && error.status !== 401) {
                if (error.code === "invalid_grade") {
                  setFieldError(page, "grade", "Grades go from 0.0 to 100.0.");
                } else {
                  showBanner(ctx, page, "error", friendlyMessage(error));
                }
                return;
              }
              throw error;
            }
            ctx.goto({ kind: "current-detail", id });
          }),
      },
      "Save grade",
    ),
  ]);
  return page;
}

// --- dispatch -------------------------------------------------------------------

export async function renderPage(
  route: PageRoute,
  ctx: PageContext,
): Promise<HTMLElement> {
  switch (route.kind) {
    case "main":
      return pageMain(ctx);
    case "previous-list":
      return pagePreviousList(ctx);
    case "previous-detail":
      return pagePreviousDetail(ctx, route.id);
    case "login":
      return pageLogin(ctx, route);
    case "register":
      return pageRegister(ctx);
    case "student-home":
      return pageStudentHome(ctx);
    case "instructor-home":
      return pageInstructorHome(ctx);
    case "proposed-list":
      return pageProposedList(ctx);
    case "proposed-detail":
      return pageProposedDetail(ctx, route.id);
    case "new-idea":
      return pageNewIdea(ctx);
    case "edit-proposed":
      return pageEditProposed(ctx, route.id);
    case "pending-queue":
      return pagePendingQueue(ctx);
    case "current-list":
      return pageCurrentList(ctx);
    case "current-detail":
      return pageCurrentDetail(ctx, route.id);
    case "stage-submit":
      return pageStageSubmit(ctx, route.id, route.stage);
    case "grade-stage":
      return pageGradeStage(ctx, route.id, route.stage);
  }
}
