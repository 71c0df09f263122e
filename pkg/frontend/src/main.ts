import { ApiClient } from "./api.js";
import { initApp } from "./app.js";

// Base URL: ?api=http://host:port, else same origin (the server can mount
// this page at / with --ui-dir).
const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? window.location.origin;
initApp(document, new ApiClient(base));
