/** Absolute XPaths over the original page tree.
 *
 * Instrumented pages stamp every original element with its
 * backend-computed path in `data-cstl-path` and mark everything the
 * console adds itself with `data-cstl-injected`.  Recomputing a
 * clicked element's path client-side therefore has to ignore two
 * kinds of strangers in the live DOM: injected console chrome, and
 * elements the browser's parser invented (an implied tbody, say) that
 * the backend never saw.  Both kinds are unstamped, which is the test
 * used whenever the document is instrumented at all; bare documents
 * fall back to skipping just the injected markers.
 */

export const INJECTED_ATTR = "data-cstl-injected";
export const PATH_ATTR = "data-cstl-path";

/** True when the element sits inside console chrome. */
export function isInjected(el: Element): boolean {
  return el.closest(`[${INJECTED_ATTR}]`) !== null;
}

function original(el: Element, stampedDoc: boolean): boolean {
  if (stampedDoc) return el.hasAttribute(PATH_ATTR);
  return !el.hasAttribute(INJECTED_ATTR);
}

/** `/html[1]/body[1]/div[2]/a[1]` for el, matching the backend's
 * indexing over the tree it parsed. */
export function absoluteXPath(el: Element): string {
  const stampedDoc = el.ownerDocument.querySelector(`[${PATH_ATTR}]`) !== null;
  const segments: string[] = [];
  for (let node: Element | null = el; node !== null; node = node.parentElement) {
    if (!original(node, stampedDoc)) continue;
    let index = 1;
    for (
      let prev = node.previousElementSibling;
      prev !== null;
      prev = prev.previousElementSibling
    ) {
      if (prev.localName === node.localName && original(prev, stampedDoc)) {
        index += 1;
      }
    }
    segments.unshift(`/${node.localName}[${index}]`);
  }
  return segments.join("");
}
