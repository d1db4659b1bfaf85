/** Workflow progress panel: a static page that polls GET /session and
 * shows where training stands, what was trained so far, and a link to
 * the view the operator should be working in. */

import { ApiClient, SessionState, WORKFLOW_STEPS, nextView } from "./protocol";

export function renderPanel(root: HTMLElement, state: SessionState): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  root.removeAttribute("data-cstl-unreachable");

  const heading = doc.createElement("h1");
  heading.textContent = `Training ${state.forum_id}`;
  root.appendChild(heading);

  const steps = doc.createElement("ol");
  steps.className = "cstl-steps";
  const reached = (WORKFLOW_STEPS as readonly string[]).indexOf(state.workflow_step);
  WORKFLOW_STEPS.forEach((step, index) => {
    const item = doc.createElement("li");
    item.textContent = step;
    if (index < reached) item.className = "done";
    if (index === reached) {
      item.className = "current";
      item.setAttribute("data-cstl-current", "1");
    }
    steps.appendChild(item);
  });
  root.appendChild(steps);

  const prompt = doc.createElement("p");
  prompt.className = "cstl-prompt";
  prompt.textContent = state.complete
    ? "The blueprint is written; training is finished."
    : state.prompt;
  root.appendChild(prompt);

  if (!state.complete) {
    const open = doc.createElement("a");
    open.className = "cstl-open";
    open.href = nextView(state);
    open.textContent = "Open the current task";
    root.appendChild(open);
  }

  const kinds = Object.keys(state.trained).sort();
  if (kinds.length > 0) {
    const trained = doc.createElement("dl");
    trained.className = "cstl-trained";
    for (const kind of kinds) {
      const term = doc.createElement("dt");
      term.textContent = kind;
      trained.appendChild(term);
      const detail = doc.createElement("dd");
      detail.textContent = state.trained[kind].join(", ");
      trained.appendChild(detail);
    }
    root.appendChild(trained);
  }

  if (state.sections_of_interest.length > 0) {
    const sections = doc.createElement("p");
    sections.className = "cstl-sections";
    sections.textContent = `Sections of interest: ${state.sections_of_interest.join(", ")}`;
    root.appendChild(sections);
  }
}

/** Render once and keep polling until the workflow completes; the
 * returned function stops the poll. */
export function runPanel(
  doc: Document,
  client: ApiClient = new ApiClient(),
  pollMs = 2000,
): () => void {
  const found = doc.getElementById("cstl-panel");
  if (found === null) return () => undefined;
  const root = found;
  let timer: ReturnType<typeof setTimeout> | null = null;
  let stopped = false;

  async function refresh(): Promise<void> {
    let done = false;
    try {
      const state = await client.session();
      renderPanel(root, state);
      done = state.complete;
    } catch {
      root.setAttribute("data-cstl-unreachable", "1");
    }
    if (!done && !stopped) {
      timer = setTimeout(() => void refresh(), pollMs);
    }
  }

  void refresh();
  return () => {
    stopped = true;
    if (timer !== null) clearTimeout(timer);
  };
}
