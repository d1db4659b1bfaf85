import { runReview } from "../review";

function boot(): void {
  runReview(document);
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot);
} else {
  boot();
}
