import { runCollector } from "../collector";

function boot(): void {
  runCollector(document);
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot);
} else {
  boot();
}
