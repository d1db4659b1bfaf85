/** DOM scraps for console chrome; everything built here carries the
 * injected marker so click capture and path computation skip it. */

import { INJECTED_ATTR } from "./xpath";

export function child(
  parent: Element,
  tag: string,
  attrs: Record<string, string>,
  text: string,
): HTMLElement {
  const el = parent.ownerDocument.createElement(tag);
  el.setAttribute(INJECTED_ATTR, "1");
  for (const [name, value] of Object.entries(attrs)) {
    el.setAttribute(name, value);
  }
  if (text !== "") el.textContent = text;
  parent.appendChild(el);
  return el;
}
