/** Accept/reject bar on highlight views.
 *
 * The backend renders the candidate (or the pagination conflict) plus
 * the two decision buttons; this script wires them to POST /decision
 * and moves the operator to whatever the session needs next.  During
 * a conflict the buttons get explicit wording, since accepting there
 * means "the highlight covers several distinct elements".
 */

import {
  ApiClient,
  DecisionPayload,
  SessionState,
  announce,
  errorText,
  navigate,
  nextView,
} from "./protocol";
import { child } from "./chrome";

export function runReview(doc: Document, client: ApiClient = new ApiClient()): void {
  const found = doc.querySelector<HTMLElement>(".cstl-review");
  if (found === null) return;
  const bar = found;
  const buttons = Array.from(
    bar.querySelectorAll<HTMLButtonElement>("button[data-cstl-decision]"),
  );
  const statusBox = child(bar, "span", { class: "cstl-status" }, "");
  let session: SessionState | null = null;

  void client.session().then(
    (state) => {
      session = state;
      if (state.pending_question !== null) {
        for (const button of buttons) {
          button.textContent =
            button.getAttribute("data-cstl-decision") === "accept"
              ? "Several distinct elements"
              : "A single element";
        }
      }
    },
    () => undefined,
  );

  for (const button of buttons) {
    button.addEventListener("click", (ev) => {
      ev.preventDefault();
      void decide(button.getAttribute("data-cstl-decision") === "accept");
    });
  }

  function settle(): void {
    for (const button of buttons) button.disabled = false;
    bar.removeAttribute("data-cstl-busy");
  }

  async function decide(accept: boolean): Promise<void> {
    for (const button of buttons) button.disabled = true;
    bar.setAttribute("data-cstl-busy", "1");
    statusBox.textContent = "Sending decision…";
    try {
      if (session === null) session = await client.session();
      const payload: DecisionPayload = { session_id: session.session_id, accept };
      const reply = await client.decision(payload);
      const ok = reply.status === 200;
      announce(doc, "cstl:decision-result", {
        ok,
        status: reply.status,
        body: reply.body,
        payload,
      });
      if (!ok) {
        // A dead end (every candidate rejected, exemplars reset) sends
        // the operator back to the page to pick different elements.
        statusBox.textContent = errorText(reply);
        const after = await client.session();
        bar.querySelector("[data-cstl-back]")?.remove();
        child(bar!, "a", { "data-cstl-back": "1", href: nextView(after) }, "Continue");
        settle();
        return;
      }
      statusBox.textContent = "Recorded.";
      navigate(doc, nextView(await client.session()));
      settle();
    } catch {
      statusBox.textContent = "The backend is unreachable; try again.";
      settle();
    }
  }
}
