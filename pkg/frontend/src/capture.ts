/** Click capture for instrumented training pages.
 *
 * Every click is swallowed (the saved page stays inert), resolved to
 * the original tree's absolute XPath, and posted as a label for
 * whatever role the backend is waiting on.  Clicks that land while a
 * post is in flight queue up and go out in order; when the backend is
 * unreachable the queue is kept and a retry button appears in the
 * banner.  Clicks on console chrome never label anything.
 */

import {
  ApiClient,
  LabelPayload,
  announce,
  errorText,
  navigate,
  nextView,
} from "./protocol";
import { child } from "./chrome";
import { absoluteXPath, isInjected } from "./xpath";

const RETRY_ATTR = "data-cstl-retry";
const ABSENT_ATTR = "data-cstl-absent";

export function runCapture(doc: Document, client: ApiClient = new ApiClient()): void {
  const found = doc.querySelector<HTMLElement>(".cstl-banner");
  if (found === null) return;
  const banner = found;
  const sessionId = banner.getAttribute("data-cstl-session") ?? "";
  const pageId = banner.getAttribute("data-cstl-page") ?? "";
  const prompt = banner.getAttribute("data-cstl-prompt") ?? banner.textContent ?? "";

  banner.textContent = "";
  child(banner, "span", { class: "cstl-prompt" }, prompt);
  const statusBox = child(banner, "span", { class: "cstl-status" }, "");
  child(banner, "button", { [ABSENT_ATTR]: "1", type: "button" }, "Not present on this page");

  const queue: Element[] = [];
  let busy = false;
  let labeled = false;
  let retryButton: HTMLElement | null = null;

  function setStatus(text: string, working: boolean): void {
    statusBox.textContent = text;
    if (working) banner.setAttribute("data-cstl-busy", "1");
    else banner.removeAttribute("data-cstl-busy");
  }

  function showRetry(): void {
    setStatus(`The backend is unreachable; ${queue.length} label(s) are waiting.`, false);
    if (retryButton === null) {
      retryButton = child(banner, "button", { [RETRY_ATTR]: "1", type: "button" }, "Retry");
    }
  }

  function clearRetry(): void {
    retryButton?.remove();
    retryButton = null;
  }

  doc.addEventListener(
    "click",
    (ev) => {
      const target = ev.target instanceof Element ? ev.target : null;
      if (target === null) return;
      ev.preventDefault();
      ev.stopPropagation();
      if (target.closest(`[${RETRY_ATTR}]`) !== null) {
        clearRetry();
        void pump();
        return;
      }
      if (target.closest(`[${ABSENT_ATTR}]`) !== null) {
        void markAbsent();
        return;
      }
      if (isInjected(target)) return;
      queue.push(target);
      void pump();
    },
    true,
  );

  async function pump(): Promise<void> {
    if (busy) return;
    const el = queue.shift();
    if (el === undefined) {
      if (labeled) navigate(doc, "/highlight");
      return;
    }
    busy = true;
    setStatus(
      queue.length > 0 ? `Sending label (${queue.length} more queued)…` : "Sending label…",
      true,
    );
    const payload: LabelPayload = {
      session_id: sessionId,
      page_id: pageId,
      role: "",
      node_path: absoluteXPath(el),
    };
    try {
      payload.role = (await client.session()).pending_role ?? "";
      const reply =
        payload.role === ""
          ? { status: 409, body: { error: "the workflow is not waiting on a label" } }
          : await client.label(payload);
      const ok = reply.status === 200;
      announce(doc, "cstl:label-result", { ok, status: reply.status, body: reply.body, payload });
      if (ok) {
        labeled = true;
        setStatus("Label accepted.", false);
      } else {
        setStatus(errorText(reply), false);
      }
    } catch {
      queue.unshift(el);
      busy = false;
      showRetry();
      return;
    }
    busy = false;
    void pump();
  }

  async function markAbsent(): Promise<void> {
    if (busy) return;
    busy = true;
    setStatus("Marking the role absent…", true);
    try {
      const role = (await client.session()).pending_role ?? "";
      const payload: LabelPayload = {
        session_id: sessionId,
        page_id: pageId,
        role,
        absent: true,
      };
      const reply = await client.label(payload);
      const ok = reply.status === 200;
      announce(doc, "cstl:label-result", { ok, status: reply.status, body: reply.body, payload });
      if (ok) {
        setStatus("Skipped.", false);
        navigate(doc, nextView(await client.session()));
      } else {
        setStatus(errorText(reply), false);
      }
    } catch {
      setStatus("The backend is unreachable; try again.", false);
    }
    busy = false;
  }
}
