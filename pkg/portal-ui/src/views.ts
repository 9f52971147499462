/**
 * DOM panels. Each render function returns a detached element built from
 * data fetched through the injected API client; the caller decides where
 * to mount it. No framework, just document.createElement.
 */

import { ApiError, PortalApi } from "./api";
import type {
  BackendRecord,
  JobResult,
  PluginManifest,
  ProfileData,
  ReconcileReport,
  ValidationFinding,
} from "./api";
import {
  canSubmit,
  collectParams,
  fieldError,
  fieldsFor,
  initialValues,
} from "./forms";
import type { FormField, FormValues } from "./forms";
import type { Session } from "./session";

export interface ViewContext {
  api: PortalApi;
  session: Session;
}

type Child = Node | string;

export function el(
  tag: string,
  attrs: Record<string, string> = {},
  children: Child[] = [],
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function banner(message: string): HTMLElement {
  return el("div", { class: "banner error", role: "alert" }, [message]);
}

function errorText(err: unknown): string {
  if (err instanceof ApiError) {
    return `${err.code}: ${err.message}`;
  }
  return String(err);
}

// -- login ---------------------------------------------------------------

export function renderLogin(
  ctx: ViewContext,
  onLoggedIn: () => void,
): HTMLElement {
  const username = el("input", { name: "username", autocomplete: "username" });
  const password = el("input", {
    name: "password",
    type: "password",
    autocomplete: "current-password",
  }) as HTMLInputElement;
  const submit = el("button", { type: "submit" }, ["Sign in"]);
  const messages = el("div", { class: "messages" });
  const form = el("form", { class: "login" }, [
    el("label", {}, ["Username", username]),
    el("label", {}, ["Password", password]),
    submit,
    messages,
  ]);
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    messages.replaceChildren();
    try {
      const login = await ctx.api.login(
        (username as HTMLInputElement).value,
        password.value,
      );
      ctx.session.accept(login);
      onLoggedIn();
    } catch (err) {
      messages.append(banner(errorText(err)));
    }
  });
  return form;
}

// -- navigation ------------------------------------------------------------

export interface NavEntry {
  view: string;
  label: string;
  adminOnly: boolean;
}

export const NAV_ENTRIES: NavEntry[] = [
  { view: "jobs", label: "Run a tool", adminOnly: false },
  { view: "projects", label: "Projects", adminOnly: false },
  { view: "profile", label: "Profile", adminOnly: false },
  { view: "catalog", label: "Plugin catalog", adminOnly: true },
  { view: "backends", label: "Back-ends", adminOnly: true },
];

/** Admin entries are absent, not disabled, for non-admin sessions. */
export function renderNav(
  ctx: ViewContext,
  onNavigate: (view: string) => void,
): HTMLElement {
  const nav = el("nav", { class: "portal-nav" });
  for (const entry of NAV_ENTRIES) {
    if (entry.adminOnly && !ctx.session.admin) {
      continue;
    }
    const link = el("a", { href: `#/${entry.view}`, "data-view": entry.view }, [
      entry.label,
    ]);
    link.addEventListener("click", (event) => {
      event.preventDefault();
      onNavigate(entry.view);
    });
    nav.append(link);
  }
  nav.append(
    el("span", { class: "whoami" }, [ctx.session.username]),
  );
  return nav;
}

// -- back-ends ---------------------------------------------------------------

function reportPanel(report: ReconcileReport): HTMLElement {
  const lines: HTMLElement[] = [];
  lines.push(el("p", {}, [
    `health: ${report.health}` + (report.noop ? " (nothing to do)" : ""),
  ]));
  for (const step of report.plan.installs) {
    lines.push(el("li", { class: "step install" }, [
      `install ${step.id}@${step.version}`,
    ]));
  }
  for (const step of report.plan.removals) {
    lines.push(el("li", { class: "step removal" }, [
      `remove ${step.id}@${step.version}`,
    ]));
  }
  if (report.error) {
    lines.push(banner(report.error));
  }
  return el("div", { class: "reconcile-report" }, [
    el("h3", {}, [`Reconcile report for ${report.backend_id}`]),
    el("ul", {}, lines),
  ]);
}

function backendRow(
  ctx: ViewContext,
  record: BackendRecord,
  panel: HTMLElement,
): HTMLElement {
  const reconcile = el("button", { "data-backend": record.backend_id }, [
    "Reconcile",
  ]);
  reconcile.addEventListener("click", async () => {
    panel.replaceChildren();
    try {
      panel.append(reportPanel(await ctx.api.reconcile(record.backend_id)));
    } catch (err) {
      panel.append(banner(errorText(err)));
    }
  });
  const row = el("tr", { class: `backend health-${record.health}` }, [
    el("td", {}, [record.backend_id]),
    el("td", {}, [record.url]),
    el("td", {}, [record.category]),
    el("td", { class: "health" }, [record.health]),
    el("td", {}, [String(record.plugins.length)]),
    el("td", {}, [reconcile]),
  ]);
  return row;
}

export async function renderBackends(ctx: ViewContext): Promise<HTMLElement> {
  const root = el("section", { class: "backends" }, [
    el("h2", {}, ["Registered back-ends"]),
  ]);
  const panel = el("div", { class: "report-slot" });
  try {
    const records = await ctx.api.listBackends();
    const body = el("tbody");
    for (const record of records) {
      body.append(backendRow(ctx, record, panel));
    }
    root.append(
      el("table", {}, [
        el("thead", {}, [
          el("tr", {}, ["id", "url", "category", "health", "plugins", ""].map(
            (title) => el("th", {}, [title]),
          )),
        ]),
        body,
      ]),
      panel,
    );
  } catch (err) {
    root.append(banner(errorText(err)));
  }
  return root;
}

// -- plugin catalog -------------------------------------------------------

function findingList(findings: ValidationFinding[]): HTMLElement {
  return el("ul", { class: "findings" },
    findings.map((finding) =>
      el("li", { class: `finding ${finding.severity}`, "data-code": finding.code }, [
        `${finding.code}: ${finding.message}`,
      ]),
    ),
  );
}

function catalogTable(plugins: PluginManifest[]): HTMLElement {
  const body = el("tbody");
  for (const plugin of plugins) {
    body.append(el("tr", { "data-plugin": `${plugin.id}@${plugin.version}` }, [
      el("td", {}, [plugin.id]),
      el("td", {}, [plugin.version]),
      el("td", {}, [plugin.category]),
      el("td", {}, [plugin.display_name]),
    ]));
  }
  return el("table", { class: "catalog" }, [
    el("thead", {}, [
      el("tr", {}, ["id", "version", "category", "name"].map(
        (title) => el("th", {}, [title]),
      )),
    ]),
    body,
  ]);
}

export async function renderCatalog(ctx: ViewContext): Promise<HTMLElement> {
  const root = el("section", { class: "catalog-view" }, [
    el("h2", {}, ["Plugin catalog"]),
  ]);
  const tableSlot = el("div", { class: "table-slot" });
  const messages = el("div", { class: "messages" });
  const file = el("input", { type: "file", name: "archive" }) as HTMLInputElement;
  const submit = el("button", { type: "submit" }, ["Upload plugin"]);
  const form = el("form", { class: "upload" }, [file, submit, messages]);

  async function refresh(): Promise<void> {
    tableSlot.replaceChildren(catalogTable(await ctx.api.listPlugins()));
  }

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    messages.replaceChildren();
    const chosen = file.files && file.files[0];
    if (!chosen) {
      messages.append(banner("choose a package file first"));
      return;
    }
    try {
      const archive = new Uint8Array(await chosen.arrayBuffer());
      const result = await ctx.api.uploadPlugin(archive);
      messages.append(
        el("p", { class: "ok" }, [
          `installed ${result.plugin.id}@${result.plugin.version}`,
        ]),
      );
      await refresh();
    } catch (err) {
      // validation failures carry the per-rule findings in their detail
      if (err instanceof ApiError && err.code === "ValidationFailed") {
        const detail = err.detail as { findings?: ValidationFinding[] } | undefined;
        messages.append(banner(errorText(err)));
        if (detail?.findings) {
          messages.append(findingList(detail.findings));
        }
      } else {
        messages.append(banner(errorText(err)));
      }
    }
  });

  try {
    await refresh();
  } catch (err) {
    messages.append(banner(errorText(err)));
  }
  root.append(form, tableSlot);
  return root;
}

// -- job launcher -----------------------------------------------------------

function paramControl(field: FormField, values: FormValues,
                      onChange: () => void): HTMLElement {
  let input: HTMLElement;
  if (field.control === "dropdown") {
    input = el("select", { name: field.name });
    if (!field.required) {
      input.append(el("option", { value: "" }, ["(default)"]));
    }
    for (const choice of field.options ?? []) {
      const option = el("option", { value: choice }, [choice]);
      if (choice === field.initial) {
        option.setAttribute("selected", "selected");
      }
      input.append(option);
    }
  } else if (field.control === "checkbox") {
    input = el("input", { type: "checkbox", name: field.name });
    if (field.initial === "true") {
      input.setAttribute("checked", "checked");
    }
  } else {
    input = el("input", { type: "text", name: field.name, value: field.initial });
  }
  input.addEventListener("change", () => {
    if (field.control === "checkbox") {
      values[field.name].raw = (input as HTMLInputElement).checked
        ? "true"
        : "false";
    } else {
      values[field.name].raw = (input as HTMLInputElement).value;
    }
    values[field.name].touched = true;
    onChange();
  });
  const error = el("span", { class: "field-error" });
  const wrapper = el("label", { class: `param param-${field.kind}` }, [
    field.name + (field.required ? " *" : ""),
    input,
    error,
  ]);
  return wrapper;
}

function resultView(api: PortalApi, result: JobResult): HTMLElement {
  const outputs = el("ul", { class: "outputs" });
  for (const name of result.outputs) {
    outputs.append(
      el("li", {}, [
        el("a", {
          href: api.outputUrl(result.job_id, name),
          download: name,
          "data-output": name,
        }, [name]),
      ]),
    );
  }
  const parts: Child[] = [
    el("h3", {}, [`Job ${result.job_id}: ${result.status}`]),
    outputs,
  ];
  if (result.stdout_log) {
    parts.push(el("pre", { class: "log stdout" }, [result.stdout_log]));
  }
  if (result.stderr_log) {
    parts.push(el("pre", { class: "log stderr" }, [result.stderr_log]));
  }
  const statusClass = result.status === "succeeded" ? "ok" : "failed";
  return el("div", { class: `job-result ${statusClass}` }, parts);
}

function jobForm(ctx: ViewContext, manifest: PluginManifest,
                 resultSlot: HTMLElement): HTMLElement {
  const fields = fieldsFor(manifest.params);
  const values = initialValues(fields);
  const fileInput = el("input", {
    type: "file",
    name: "inputs",
    multiple: "multiple",
  }) as HTMLInputElement;
  const submit = el("button", { type: "submit" }, ["Run"]) as HTMLButtonElement;
  const messages = el("div", { class: "messages" });

  const controls: Child[] = fields.map((field) =>
    paramControl(field, values, sync));
  const form = el("form", { class: "job-form", "data-service": manifest.id }, [
    el("h3", {}, [`${manifest.display_name} (${manifest.id}@${manifest.version})`]),
    ...controls,
    el("label", {}, ["Input files", fileInput]),
    submit,
    messages,
  ]);

  function sync(): void {
    submit.disabled = !canSubmit(fields, values);
    for (const field of fields) {
      const holder = form.querySelector(
        `.param-${field.kind} [name="${field.name}"]`,
      )?.parentElement;
      const slot = holder?.querySelector(".field-error");
      if (slot) {
        slot.textContent = values[field.name].touched
          ? fieldError(field, values[field.name].raw) ?? ""
          : "";
      }
    }
  }
  sync();

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    messages.replaceChildren();
    resultSlot.replaceChildren();
    const files: { name: string; data: Uint8Array }[] = [];
    for (const file of Array.from(fileInput.files ?? [])) {
      files.push({
        name: file.name,
        data: new Uint8Array(await file.arrayBuffer()),
      });
    }
    try {
      const result = await ctx.api.runJob(
        manifest.id, manifest.version, collectParams(fields, values), files);
      resultSlot.append(resultView(ctx.api, result));
    } catch (err) {
      messages.append(banner(errorText(err)));
    }
  });
  return form;
}

export async function renderJobLauncher(ctx: ViewContext): Promise<HTMLElement> {
  const root = el("section", { class: "job-launcher" }, [
    el("h2", {}, ["Run a tool"]),
  ]);
  const formSlot = el("div", { class: "form-slot" });
  const resultSlot = el("div", { class: "result-slot" });
  try {
    const tools = await ctx.api.listPlugins("ostp");
    const picker = el("select", { class: "service-picker" }) as HTMLSelectElement;
    picker.append(el("option", { value: "" }, ["choose a tool"]));
    for (const tool of tools) {
      picker.append(
        el("option", { value: `${tool.id}@${tool.version}` }, [
          `${tool.display_name} (${tool.id}@${tool.version})`,
        ]),
      );
    }
    picker.addEventListener("change", () => {
      formSlot.replaceChildren();
      resultSlot.replaceChildren();
      const chosen = tools.find(
        (tool) => `${tool.id}@${tool.version}` === picker.value,
      );
      if (chosen) {
        formSlot.append(jobForm(ctx, chosen, resultSlot));
      }
    });
    root.append(picker, formSlot, resultSlot);
  } catch (err) {
    root.append(banner(errorText(err)));
  }
  return root;
}

// -- profile ------------------------------------------------------------

function profileCard(profile: ProfileData): HTMLElement {
  const rows: Child[] = [
    el("h3", { class: "display-name" }, [profile.display_name || "(no name)"]),
  ];
  if (profile.avatar_url) {
    rows.push(el("img", { src: profile.avatar_url, alt: "avatar" }));
  }
  if (profile.interests.length) {
    rows.push(el("p", { class: "interests" }, [profile.interests.join(", ")]));
  }
  for (const link of profile.links) {
    rows.push(el("a", { href: link.url, class: "profile-link" }, [link.label]));
  }
  if (profile.source) {
    rows.push(el("p", { class: "source" }, [`imported from ${profile.source}`]));
  }
  return el("div", { class: "profile-card" }, rows);
}

export async function renderProfile(ctx: ViewContext): Promise<HTMLElement> {
  const root = el("section", { class: "profile-view" }, [
    el("h2", {}, ["Profile"]),
  ]);
  const cardSlot = el("div", { class: "card-slot" });
  const messages = el("div", { class: "messages" });

  try {
    const current = await ctx.api.profile();
    cardSlot.append(profileCard(current.profile));
  } catch (err) {
    messages.append(banner(errorText(err)));
  }

  const providerPicker = el("select", { name: "provider" }) as HTMLSelectElement;
  try {
    for (const provider of await ctx.api.listPlugins("social")) {
      providerPicker.append(
        el("option", { value: provider.id }, [provider.display_name]),
      );
    }
  } catch {
    // no providers installed; the form stays empty but harmless
  }
  const grant = el("input", { name: "grant", type: "text" }) as HTMLInputElement;
  const submit = el("button", { type: "submit" }, ["Import"]) as HTMLButtonElement;
  submit.disabled = true;
  grant.addEventListener("input", () => {
    submit.disabled = grant.value.trim() === "";
  });
  const form = el("form", { class: "profile-import" }, [
    el("label", {}, ["Provider", providerPicker]),
    el("label", {}, ["Access grant", grant]),
    submit,
  ]);
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    messages.replaceChildren();
    try {
      const merged = await ctx.api.importProfile(providerPicker.value, grant.value);
      cardSlot.replaceChildren(profileCard(merged));
    } catch (err) {
      messages.append(banner(errorText(err)));
    }
  });

  root.append(cardSlot, form, messages);
  return root;
}

// -- projects -----------------------------------------------------------

export async function renderProjects(ctx: ViewContext): Promise<HTMLElement> {
  const root = el("section", { class: "projects-view" }, [
    el("h2", {}, ["Projects"]),
  ]);
  try {
    const projects = await ctx.api.listProjects();
    const list = el("ul", { class: "projects" });
    for (const project of projects) {
      const members = project.members
        .map((member) => `${member.username} (${member.role})`)
        .join(", ");
      const services = el("ul", { class: "services" });
      for (const serviceId of project.services) {
        services.append(
          el("li", {}, [
            el("a", { href: `/p/${project.project_id}/${serviceId}/` }, [
              serviceId,
            ]),
          ]),
        );
      }
      list.append(
        el("li", { "data-project": project.project_id }, [
          el("strong", {}, [project.name]),
          el("span", { class: "members" }, [members]),
          services,
        ]),
      );
    }
    root.append(list);
  } catch (err) {
    root.append(banner(errorText(err)));
  }
  return root;
}
