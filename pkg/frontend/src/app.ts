// Application shell: owns the session, the route stack, and the render
// loop. Pages are pure render functions; everything stateful funnels
// through here so tests can drive the whole client deterministically.

import { ApiClient, ApiError, Me } from "./api.js";
import { friendlyMessage, PageContext, renderPage } from "./pages.js";
import {
  PageRoute,
  parseRoute,
  routeGate,
  routeHasForm,
  routeHash,
} from "./routes.js";
import { Dom } from "./ui.js";

export interface WindowLike {
  document: Document;
  location: { hash: string };
  addEventListener(type: string, listener: () => void): void;
}

export interface AppOptions {
  root: HTMLElement;
  api: ApiClient;
  window: WindowLike;
}

export class App {
  readonly api: ApiClient;
  session: Me | null = null;
  route: PageRoute = { kind: "main" };

  private readonly root: HTMLElement;
  private readonly win: WindowLike;
  private readonly dom: Dom;
  private readonly stack: PageRoute[] = [];
  private queue: Promise<void> = Promise.resolve();

  constructor(options: AppOptions) {
    this.root = options.root;
    this.api = options.api;
    this.win = options.window;
    this.dom = new Dom(options.window.document);
  }

  /** Wait until every queued navigation and handler has settled. */
  async idle(): Promise<void> {
    // Handlers enqueue follow-up navigation, so drain until stable.
    let tail: Promise<void>;
    do {
      tail = this.queue;
      await tail;
    } while (tail !== this.queue);
  }

  async start(): Promise<void> {
    this.session = await this.fetchSession();
    this.win.addEventListener("hashchange", () => {
      const hash = this.win.location.hash || "#/";
      if (hash !== routeHash(this.route)) {
        this.enqueue(() => this.show(parseRoute(hash), { push: true }));
      }
    });
    this.enqueue(() =>
      this.show(parseRoute(this.win.location.hash || "#/"), { push: false }),
    );
    return this.idle();
  }

  goto(route: PageRoute): void {
    this.enqueue(() => this.show(route, { push: true }));
  }

  back(): void {
    const previous = this.stack.pop() ?? { kind: "main" as const };
    this.enqueue(() => this.show(previous, { push: false }));
  }

  refresh(): void {
    this.enqueue(() => this.show(this.route, { push: false }));
  }

  /** Run page-handler work on the queue with app-level error handling. */
  run(task: () => Promise<void>): void {
    this.enqueue(task);
  }

  private enqueue(task: () => Promise<void>): void {
    this.queue = this.queue.then(() =>
      task().catch((error) => this.handleError(error)),
    );
  }

  private async fetchSession(): Promise<Me | null> {
    try {
      return await this.api.me();
    } catch (error) {
      if (error instanceof ApiError && error.status === 401) return null;
      throw error;
    }
  }

  private async sessionRefresh(): Promise<void> {
    this.session = await this.fetchSession();
  }

  private context(): PageContext {
    return {
      dom: this.dom,
      api: this.api,
      session: this.session,
      goto: (route) => this.goto(route),
      back: () => this.back(),
      run: (task) => this.run(task),
      refresh: () => this.refresh(),
      sessionRefresh: () => this.sessionRefresh(),
    };
  }

  private async handleError(error: unknown): Promise<void> {
    if (error instanceof ApiError && error.status === 401) {
      // The server is the session authority: any 401 ends the local session.
      this.session = null;
      await this.show(
        {
          kind: "login",
          next: routeHash(this.route),
          notice: error.code === "session_expired" ? "expired" : "required",
        },
        { push: false },
      );
      return;
    }
    const message =
      error instanceof ApiError
        ? friendlyMessage(error)
        : "Something went wrong talking to the server.";
    this.paint(
      this.route,
      this.dom.el(
        "div",
        {},
        this.dom.banner("error", message),
        this.dom.el(
          "button",
          { "data-action": "retry", onclick: () => this.refresh() },
          "Try again",
        ),
      ),
    );
  }

  private async show(
    route: PageRoute,
    options: { push: boolean },
  ): Promise<void> {
    const gate = routeGate(route);
    if (gate !== "public" && this.session === null) {
      route = { kind: "login", next: routeHash(route), notice: "required" };
    } else if (
      (gate === "student" || gate === "instructor") &&
      this.session !== null &&
      this.session.user.role !== gate
    ) {
      if (options.push) this.pushCurrent();
      this.paint(
        route,
        this.dom.el(
          "div",
          {},
          this.dom.banner("error", "Your account cannot open this page."),
        ),
      );
      return;
    }
    if (options.push) this.pushCurrent();
    let page: HTMLElement;
    try {
      page = await renderPage(route, this.context());
    } catch (error) {
      if (error instanceof ApiError && error.status === 401) {
        // Login redirect that remembers the page being opened, not the
        // one we came from.
        this.session = null;
        await this.show(
          {
            kind: "login",
            next: routeHash(route),
            notice: error.code === "session_expired" ? "expired" : "required",
          },
          { push: false },
        );
        return;
      }
      page = this.dom.el(
        "div",
        {},
        this.dom.banner(
          "error",
          error instanceof ApiError && error.status === 403
            ? "You do not have access to this project."
            : error instanceof ApiError && error.status === 404
              ? "That page does not exist any more."
              : "Something went wrong talking to the server.",
        ),
        this.dom.el(
          "button",
          { "data-action": "retry", onclick: () => this.refresh() },
          "Try again",
        ),
      );
    }
    this.paint(route, page);
  }

  private pushCurrent(): void {
    const top = this.stack[this.stack.length - 1];
    if (!top || routeHash(top) !== routeHash(this.route)) {
      this.stack.push(this.route);
    }
  }

  private homeRoute(): PageRoute {
    if (this.session === null) return { kind: "main" };
    return this.session.user.role === "instructor"
      ? { kind: "instructor-home" }
      : { kind: "student-home" };
  }

  private chrome(route: PageRoute): HTMLElement {
    const dom = this.dom;
    const bar = dom.el("header", { class: "chrome" });
    bar.append(
      dom.el(
        "a",
        {
          href: "#/",
          class: "brand",
          onclick: (event: Event) => {
            event.preventDefault();
            this.goto({ kind: "main" });
          },
        },
        "Senior Projects",
      ),
    );
    if (route.kind !== "main") {
      bar.append(
        dom.el(
          "button",
          { "data-nav": "back", onclick: () => this.back() },
          "Back",
        ),
        dom.el(
          "button",
          { "data-nav": "home", onclick: () => this.goto(this.homeRoute()) },
          "Home",
        ),
      );
      if (routeHasForm(route, this.session?.user.role ?? null)) {
        // Cancel abandons the form: nothing is sent, navigation goes back.
        bar.append(
          dom.el(
            "button",
            { "data-nav": "cancel", onclick: () => this.back() },
            "Cancel",
          ),
        );
      }
    }
    if (this.session !== null) {
      bar.append(
        dom.el(
          "span",
          { "data-session": "" },
          `Signed in as ${this.session.user.username} (${this.session.user.role})`,
        ),
        dom.el(
          "button",
          {
            "data-action": "logout",
            onclick: () =>
              this.run(async () => {
                await this.api.logout();
                this.session = null;
                this.stack.length = 0;
                await this.show({ kind: "main" }, { push: false });
              }),
          },
          "Log out",
        ),
      );
    }
    return bar;
  }

  private paint(route: PageRoute, page: HTMLElement): void {
    this.route = route;
    this.win.location.hash = routeHash(route);
    this.root.innerHTML = "";
    this.root.append(
      this.chrome(route),
      this.dom.el("main", { class: "page" }, page),
    );
  }
}
