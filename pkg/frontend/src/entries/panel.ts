import { runPanel } from "../panel";

function boot(): void {
  runPanel(document);
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot);
} else {
  boot();
}
