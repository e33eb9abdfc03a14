import { ApiClient } from "./api.js";
import { mountApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  // Served by `exagree serve --static` at /app; the API lives at the origin.
  mountApp(root, new ApiClient(""));
}
