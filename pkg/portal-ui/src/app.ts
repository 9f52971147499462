/**
 * Application shell: session handling plus hash-style view switching.
 * mount() is exported so tests can drive the whole app against a fake
 * or real fetch without a bundler in the way.
 */

import { PortalApi } from "./api";
import type { FetchLike } from "./api";
import { Session } from "./session";
import type { StorageLike } from "./session";
import {
  renderBackends,
  renderCatalog,
  renderJobLauncher,
  renderLogin,
  renderNav,
  renderProfile,
  renderProjects,
} from "./views";
import type { ViewContext } from "./views";

export interface MountOptions {
  fetchImpl: FetchLike;
  storage: StorageLike;
  baseUrl?: string;
}

export interface App {
  show(view: string): Promise<void>;
  context: ViewContext;
  root: HTMLElement;
}

const DEFAULT_VIEW = "jobs";

export function mount(root: HTMLElement, options: MountOptions): App {
  const session = new Session(options.storage);
  const api = new PortalApi(
    options.fetchImpl,
    options.baseUrl ?? "",
    () => session.token,
  );
  const context: ViewContext = { api, session };

  const header = document.createElement("header");
  const main = document.createElement("main");
  root.replaceChildren(header, main);

  async function show(view: string): Promise<void> {
    if (!session.active) {
      header.replaceChildren();
      main.replaceChildren(renderLogin(context, () => void show(DEFAULT_VIEW)));
      return;
    }
    header.replaceChildren(renderNav(context, (next) => void show(next)));
    let panel: HTMLElement;
    switch (view) {
      case "projects":
        panel = await renderProjects(context);
        break;
      case "profile":
        panel = await renderProfile(context);
        break;
      case "catalog":
        panel = await renderCatalog(context);
        break;
      case "backends":
        panel = await renderBackends(context);
        break;
      default:
        panel = await renderJobLauncher(context);
    }
    main.replaceChildren(panel);
  }

  void show(session.active ? DEFAULT_VIEW : "login");
  return { show, context, root };
}
