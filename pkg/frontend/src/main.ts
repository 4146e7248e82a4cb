// Bootstrap: load the runtime config (base URL, optional token env-injected
// server-side), build the typed client, mount the app.

import { ApiClient } from "./client.js";
import { mountApp } from "./app.js";
import type { ConsoleConfig } from "./types.js";

async function boot(): Promise<void> {
  const response = await fetch("./config.json");
  const config = (await response.json()) as ConsoleConfig;
  const client = new ApiClient(config);
  const root = document.querySelector<HTMLElement>("#app");
  if (!root) {
    throw new Error("missing #app mount point");
  }
  mountApp(root, client);
}

void boot();
