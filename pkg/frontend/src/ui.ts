// Small DOM-building helpers bound to a document, so pages stay portable
// between the browser and a synthetic DOM in tests.

export type Child = Node | string | null | undefined | false;

export interface Attrs {
  [name: string]: string | boolean | ((event: Event) => void) | undefined;
}

export class Dom {
  constructor(readonly doc: Document) {}

  el(tag: string, attrs: Attrs = {}, ...children: Child[]): HTMLElement {
    const node = this.doc.createElement(tag);
    for (const [name, value] of Object.entries(attrs)) {
      if (value === undefined || value === false) continue;
      if (typeof value === "function") {
        node.addEventListener(name.replace(/^on/, ""), value);
      } else if (value === true) {
        node.setAttribute(name, "");
      } else {
        node.setAttribute(name, value);
      }
    }
    this.append(node, children);
    return node;
  }

  append(node: HTMLElement, children: Child[]): void {
    for (const child of children) {
      if (child === null || child === undefined || child === false) continue;
      node.append(
        typeof child === "string" ? this.doc.createTextNode(child) : child,
      );
    }
  }

  /** Banner for user-facing notices; kind styles it, data-banner finds it. */
  banner(kind: "error" | "info" | "success", text: string): HTMLElement {
    return this.el(
      "p",
      { class: `banner banner-${kind}`, "data-banner": kind },
      text,
    );
  }
}

export function fmtTime(ms: number): string {
  return new Date(ms).toISOString().replace("T", " ").slice(0, 16) + " UTC";
}

export function fmtSize(bytes: number): string {
  if (bytes < 1024) return `${bytes} B`;
  const kib = bytes / 1024;
  if (kib < 1024) return `${kib.toFixed(1)} KiB`;
  return `${(kib / 1024).toFixed(1)} MiB`;
}
