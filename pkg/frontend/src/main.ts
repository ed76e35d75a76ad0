// Browser entry point: wire the client to the same-origin API and mount.

import { ApiClient } from "./api.js";
import { App } from "./app.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");

const app = new App({
  root,
  api: new ApiClient((url, init) => fetch(url, init)),
  window,
});
void app.start();
