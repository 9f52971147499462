// @vitest-environment jsdom
//
// Full-stack round trip: real portal and back-end processes, the UI driven
// through the DOM, and the downloaded output compared byte for byte with
// what the command-line client produces for the same input.

import { spawn, spawnSync } from "node:child_process";
import type { ChildProcess } from "node:child_process";
import { mkdirSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { mount } from "../src/app";
import type { App } from "../src/app";

const INPUT_NAME = "notes.txt";
const INPUT_TEXT = "pear\napple\nfig\napple\nbanana\n";
const SORTED = "apple\napple\nbanana\nfig\npear\n";

const ADMIN = ["root", "root-pw-1"] as const;
const USER = ["ada", "ada-pw-1"] as const;

let work: string;
let frontendUrl: string;
const children: ChildProcess[] = [];

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function until(
  what: string,
  predicate: () => boolean | Promise<boolean>,
  timeoutMs = 20000,
  detail?: () => string,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    if (await predicate()) {
      return;
    }
    if (Date.now() > deadline) {
      const extra = detail ? `; ${detail()}` : "";
      throw new Error(`timed out waiting for ${what}${extra}`);
    }
    await sleep(50);
  }
}

async function readPort(dataDir: string): Promise<number> {
  let port = 0;
  await until(`port file in ${dataDir}`, () => {
    try {
      const text = readFileSync(join(dataDir, "port"), "utf-8").trim();
      port = parseInt(text, 10);
      return port > 0;
    } catch {
      return false;
    }
  });
  return port;
}

async function serverUp(url: string, path: string): Promise<void> {
  await until(`server at ${url}`, async () => {
    try {
      await fetch(url + path);
      return true;
    } catch {
      return false;
    }
  });
}

function run(cmd: string, args: string[], env: Record<string, string> = {}) {
  const result = spawnSync(cmd, args, {
    env: { ...process.env, ...env },
    encoding: "utf-8",
  });
  if (result.error) {
    throw result.error;
  }
  return result;
}

beforeAll(async () => {
  work = mkdtempSync(join(tmpdir(), "portal-ui-rt-"));

  const backendDir = join(work, "backend");
  mkdirSync(backendDir);
  const backend = spawn(
    "sselab-backend",
    ["serve", "--category", "ostp", "--data-dir", backendDir, "--port", "0"],
    { stdio: "ignore" },
  );
  children.push(backend);

  const frontendDir = join(work, "frontend");
  mkdirSync(frontendDir);
  for (const [name, password, admin] of [
    [...ADMIN, true] as const,
    [...USER, false] as const,
  ]) {
    const args = ["add-user", "--data-dir", frontendDir, name, password];
    if (admin) {
      args.splice(1, 0, "--admin");
    }
    const created = run("sselab-frontend", args);
    if (created.status !== 0) {
      throw new Error(`add-user failed: ${created.stderr}`);
    }
  }
  const frontend = spawn(
    "sselab-frontend",
    ["serve", "--data-dir", frontendDir, "--port", "0"],
    { stdio: "ignore" },
  );
  children.push(frontend);

  const backendPort = await readPort(backendDir);
  await serverUp(`http://127.0.0.1:${backendPort}`, "/be/health");
  const frontendPort = await readPort(frontendDir);
  frontendUrl = `http://127.0.0.1:${frontendPort}`;
  await serverUp(frontendUrl, "/api/stats");

  // registration is an operator step, not a UI view; do it over the API
  const loginResponse = await fetch(frontendUrl + "/api/auth/login", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ username: ADMIN[0], password: ADMIN[1] }),
  });
  const adminToken = (await loginResponse.json()).token as string;
  const registered = await fetch(frontendUrl + "/api/admin/backends", {
    method: "POST",
    headers: {
      "Content-Type": "application/json",
      "X-SSELab-Token": adminToken,
    },
    body: JSON.stringify({
      url: `http://127.0.0.1:${backendPort}`,
      category: "ostp",
    }),
  });
  if (registered.status !== 201) {
    throw new Error(`backend registration failed: ${await registered.text()}`);
  }

  const packaged = spawnSync("python3", [
    "-c",
    "import sys; from sselab.refplugins import archive; " +
      "sys.stdout.buffer.write(archive('line-sort'))",
  ]);
  if (packaged.status !== 0) {
    throw new Error(`packaging failed: ${packaged.stderr}`);
  }
  writeFileSync(join(work, "line-sort.tar.gz"), packaged.stdout);
}, 60000);

afterAll(() => {
  for (const child of children) {
    child.kill("SIGKILL");
  }
  if (work) {
    rmSync(work, { recursive: true, force: true });
  }
});

describe("portal round trip", () => {
  it("produces the same output bytes through the UI as through the CLI", async () => {
    const root = document.createElement("div");
    document.body.append(root);
    const store = new Map<string, string>();
    const app: App = mount(root, {
      fetchImpl: (input, init) => fetch(input, init),
      storage: {
        getItem: (k) => store.get(k) ?? null,
        setItem: (k, v) => void store.set(k, v),
        removeItem: (k) => void store.delete(k),
      },
      baseUrl: frontendUrl,
    });

    // sign in through the form
    await until("login form", () => root.querySelector("form.login") !== null);
    const username = root.querySelector(
      'input[name="username"]',
    ) as HTMLInputElement;
    const password = root.querySelector(
      'input[name="password"]',
    ) as HTMLInputElement;
    username.value = ADMIN[0];
    password.value = ADMIN[1];
    root
      .querySelector("form.login")
      ?.dispatchEvent(new Event("submit", { cancelable: true }));
    await until("navigation", () => root.querySelector("nav.portal-nav") !== null);

    // install the tool through the catalog upload form
    await app.show("catalog");
    await until("upload form", () => root.querySelector("form.upload") !== null);
    const archiveBytes = readFileSync(join(work, "line-sort.tar.gz"));
    const fileInput = root.querySelector(
      'form.upload input[type="file"]',
    ) as HTMLInputElement;
    Object.defineProperty(fileInput, "files", {
      value: [
        {
          name: "line-sort.tar.gz",
          arrayBuffer: async () =>
            archiveBytes.buffer.slice(
              archiveBytes.byteOffset,
              archiveBytes.byteOffset + archiveBytes.byteLength,
            ),
        },
      ],
      configurable: true,
    });
    root
      .querySelector("form.upload")
      ?.dispatchEvent(new Event("submit", { cancelable: true }));
    await until(
      "catalog row",
      () => root.querySelector('[data-plugin="line-sort@1.0.0"]') !== null,
    );

    // reconcile from the back-ends table and wait for the report
    await app.show("backends");
    await until(
      "reconcile button",
      () => root.querySelector("button[data-backend]") !== null,
    );
    (root.querySelector("button[data-backend]") as HTMLButtonElement).click();
    await until(
      "reconcile report",
      () => root.querySelector(".reconcile-report") !== null,
    );
    expect(root.querySelector(".reconcile-report")?.textContent).toContain(
      "health: healthy",
    );

    // run the job from the generated form
    await app.show("jobs");
    await until(
      "service picker",
      () => root.querySelector("select.service-picker") !== null,
    );
    const picker = root.querySelector(
      "select.service-picker",
    ) as HTMLSelectElement;
    picker.value = "line-sort@1.0.0";
    picker.dispatchEvent(new Event("change"));
    await until("job form", () => root.querySelector("form.job-form") !== null);
    const jobFiles = root.querySelector(
      'form.job-form input[type="file"]',
    ) as HTMLInputElement;
    const inputBytes = new TextEncoder().encode(INPUT_TEXT);
    Object.defineProperty(jobFiles, "files", {
      value: [
        {
          name: INPUT_NAME,
          arrayBuffer: async () => inputBytes.buffer,
        },
      ],
      configurable: true,
    });
    root
      .querySelector("form.job-form")
      ?.dispatchEvent(new Event("submit", { cancelable: true }));
    await until(
      "job result",
      () => root.querySelector(".job-result") !== null,
      30000,
      () => `form messages: ${root.querySelector("form.job-form .messages")?.textContent}`,
    );
    expect(root.querySelector(".job-result h3")?.textContent).toContain(
      "succeeded",
    );

    // download through the link the result panel rendered
    const link = root.querySelector(
      `a[data-output="${INPUT_NAME}"]`,
    ) as HTMLAnchorElement;
    expect(link).not.toBeNull();
    const href = link.getAttribute("href") as string;
    const token = app.context.session.token as string;
    const downloaded = await fetch(href, {
      headers: { "X-SSELab-Token": token },
    });
    expect(downloaded.status).toBe(200);
    const uiBytes = new Uint8Array(await downloaded.arrayBuffer());
    expect(new TextDecoder().decode(uiBytes)).toBe(SORTED);

    // same input through the command-line client
    const home = join(work, "home");
    mkdirSync(home, { recursive: true });
    const cliIn = join(work, INPUT_NAME);
    writeFileSync(cliIn, INPUT_TEXT);
    const outDir = join(work, "cli-out");
    const env = { HOME: home, SSELAB_URL: frontendUrl };
    const loggedIn = run(
      "sselab",
      ["login", "--username", USER[0], "--password", USER[1]],
      env,
    );
    expect(loggedIn.status).toBe(0);
    const ran = run(
      "sselab",
      ["run", "line-sort", "--in", cliIn, "--out", outDir],
      env,
    );
    expect(ran.status, ran.stderr).toBe(0);
    const cliBytes = new Uint8Array(readFileSync(join(outDir, INPUT_NAME)));

    expect(Array.from(uiBytes)).toEqual(Array.from(cliBytes));
  }, 60000);
});
