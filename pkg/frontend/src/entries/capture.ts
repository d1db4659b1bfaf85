import { runCapture } from "../capture";

function boot(): void {
  runCapture(document);
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot);
} else {
  boot();
}
