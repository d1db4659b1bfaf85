/** Wire types and transport for the trainer backend.
 *
 * Every request goes through one serialized queue: the operator's
 * actions reach the backend in the order they happened, and nothing
 * overlaps.  Paths are resolved against the page origin rather than
 * the injected `<base>` element, so the console only ever talks to the
 * loopback backend that served it.
 */

export interface IdentifierState {
  technique: string;
  selector: string;
  expects_many: boolean;
  resolved_count: number;
  conflict?: { resolved_count: number; chosen_index: number };
}

export interface ConflictQuestion {
  kind: string;
  page_kind: string;
  count: number;
}

export interface SessionState {
  session_id: string;
  forum_id: string;
  workflow_step: string;
  pending_role: string | null;
  expected_page_id: string | null;
  pending_identifier: IdentifierState | null;
  pending_question: ConflictQuestion | null;
  prompt: string;
  sections_of_interest: string[];
  trained: Record<string, string[]>;
  pages: Record<string, { page_id: string; source_url: string }>;
  complete: boolean;
}

export interface LabelPayload {
  session_id: string;
  page_id: string;
  role: string;
  node_path?: string;
  snippets?: string[];
  post_count?: number;
  absent?: boolean;
}

export interface DecisionPayload {
  session_id: string;
  accept: boolean;
}

export interface HttpReply {
  status: number;
  body: unknown;
}

export type Transport = (
  method: "GET" | "POST",
  url: string,
  body?: unknown,
) => Promise<HttpReply>;

export const WORKFLOW_STEPS = [
  "Login",
  "Home",
  "Section",
  "ThreadPage",
  "WrapperRefinement",
  "ConflictCheck",
  "Done",
] as const;

/** XMLHttpRequest wrapped in a promise; resolves on any HTTP status,
 * rejects only when the backend cannot be reached at all. */
export function xhrTransport(
  method: "GET" | "POST",
  url: string,
  body?: unknown,
): Promise<HttpReply> {
  return new Promise((resolve, reject) => {
    const xhr = new XMLHttpRequest();
    xhr.open(method, url);
    xhr.onload = () => {
      let parsed: unknown = xhr.responseText;
      const type = xhr.getResponseHeader("Content-Type") ?? "";
      if (type.includes("application/json")) {
        try {
          parsed = JSON.parse(xhr.responseText);
        } catch {
          // leave the raw text in place
        }
      }
      resolve({ status: xhr.status, body: parsed });
    };
    xhr.onerror = () => reject(new Error(`backend unreachable: ${method} ${url}`));
    xhr.onabort = () => reject(new Error(`request aborted: ${method} ${url}`));
    if (body === undefined) {
      xhr.send();
    } else {
      xhr.setRequestHeader("Content-Type", "application/json");
      xhr.send(JSON.stringify(body));
    }
  });
}

export class ApiClient {
  private tail: Promise<unknown> = Promise.resolve();

  constructor(
    private readonly transport: Transport = xhrTransport,
    private readonly origin?: string,
  ) {}

  private url(path: string): string {
    if (!path.startsWith("/")) {
      throw new Error(`backend paths are absolute, got ${path}`);
    }
    return (this.origin ?? window.location.origin) + path;
  }

  private enqueue<T>(work: () => Promise<T>): Promise<T> {
    const next = this.tail.then(work, work);
    this.tail = next.then(
      () => undefined,
      () => undefined,
    );
    return next;
  }

  request(method: "GET" | "POST", path: string, body?: unknown): Promise<HttpReply> {
    const url = this.url(path);
    return this.enqueue(() => this.transport(method, url, body));
  }

  async session(): Promise<SessionState> {
    const reply = await this.request("GET", "/session");
    if (reply.status !== 200) {
      throw new Error(`GET /session answered ${reply.status}`);
    }
    return reply.body as SessionState;
  }

  label(payload: LabelPayload): Promise<HttpReply> {
    return this.request("POST", "/label", payload);
  }

  decision(payload: DecisionPayload): Promise<HttpReply> {
    return this.request("POST", "/decision", payload);
  }
}

/** Where the operator should look next for a given session state. */
export function nextView(state: SessionState): string {
  if (state.complete) return "/ui/panel.html";
  if (state.pending_identifier !== null || state.pending_question !== null) {
    return "/highlight";
  }
  if (state.expected_page_id === null) return "/ui/panel.html";
  if (state.pending_role === "PostWrapper") {
    return `/collector/${state.expected_page_id}`;
  }
  return `/page/${state.expected_page_id}`;
}

/** Announce a navigation, then follow it; cancel the event to stay put. */
export function navigate(doc: Document, path: string): void {
  const event = new CustomEvent("cstl:navigate", {
    detail: { path },
    cancelable: true,
    bubbles: true,
  });
  if (doc.dispatchEvent(event)) {
    doc.defaultView?.location.assign(path);
  }
}

export function announce(doc: Document, type: string, detail: unknown): void {
  doc.dispatchEvent(new CustomEvent(type, { detail }));
}

/** Human-readable error from a backend reply. */
export function errorText(reply: HttpReply): string {
  const body = reply.body as { error?: unknown } | null;
  if (body !== null && typeof body === "object" && typeof body.error === "string") {
    return body.error;
  }
  return `the backend answered ${reply.status}`;
}
