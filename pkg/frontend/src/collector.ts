/** Snippet collector form: at least two pasted snippets and the
 * visible post count, posted together as the wrapper label.  The
 * snippets travel verbatim; only surrounding whitespace (the
 * operator's paste slop) is stripped. */

import { ApiClient, LabelPayload, announce, errorText, navigate } from "./protocol";
import { child } from "./chrome";

export function runCollector(doc: Document, client: ApiClient = new ApiClient()): void {
  const found = doc.querySelector<HTMLFormElement>("form.cstl-collector");
  if (found === null) return;
  const form = found;
  const errorBox = child(form, "p", { class: "cstl-error" }, "");
  errorBox.hidden = true;

  function fail(message: string, detail: Record<string, unknown>): void {
    errorBox.textContent = message;
    errorBox.hidden = false;
    announce(doc, "cstl:collector-result", { ok: false, status: 0, ...detail });
  }

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void submit();
  });

  async function submit(): Promise<void> {
    const snippets = Array.from(
      form.querySelectorAll<HTMLTextAreaElement>('textarea[name="snippet"]'),
    )
      .map((area) => area.value.trim())
      .filter((text) => text !== "");
    if (snippets.length < 2) {
      fail("Paste snippets from at least two different posts.", { invalid: "snippets" });
      return;
    }
    const countBox = form.querySelector<HTMLInputElement>('input[name="post_count"]');
    const postCount = Number(countBox?.value ?? "");
    if (!Number.isInteger(postCount) || postCount < 1) {
      fail("Enter how many posts this page shows.", { invalid: "post_count" });
      return;
    }
    const payload: LabelPayload = {
      session_id: form.getAttribute("data-cstl-session") ?? "",
      page_id: form.getAttribute("data-cstl-page") ?? "",
      role: form.getAttribute("data-cstl-role") ?? "",
      snippets,
      post_count: postCount,
    };
    const submitButton = form.querySelector<HTMLButtonElement>('button[type="submit"]');
    if (submitButton !== null) submitButton.disabled = true;
    form.setAttribute("data-cstl-busy", "1");
    errorBox.hidden = true;
    try {
      const endpoint = form.getAttribute("data-cstl-endpoint") ?? "/label";
      const reply = await client.request("POST", endpoint, payload);
      const ok = reply.status === 200;
      announce(doc, "cstl:collector-result", {
        ok,
        status: reply.status,
        body: reply.body,
        payload,
      });
      if (ok) {
        navigate(doc, "/highlight");
      } else {
        errorBox.textContent = errorText(reply);
        errorBox.hidden = false;
      }
    } catch {
      errorBox.textContent = "The backend is unreachable; your snippets are still here, try again.";
      errorBox.hidden = false;
    }
    if (submitButton !== null) submitButton.disabled = false;
    form.removeAttribute("data-cstl-busy");
  }
}
