import { describe, expect, it } from "vitest";

import { ApiError, PortalApi, encodeJobBody } from "../src/api";

interface Captured {
  url: string;
  method: string;
  headers: Record<string, string>;
  body?: BodyInit | null;
}

function capturingApi(payload: unknown = [], status = 200) {
  const calls: Captured[] = [];
  const fetchImpl = async (url: string, init?: RequestInit) => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      headers: { ...((init?.headers as Record<string, string>) ?? {}) },
      body: init?.body as BodyInit | null,
    });
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  const api = new PortalApi(fetchImpl, "http://portal", () => "tok-9");
  return { api, calls };
}

// Paths the front-end documents; the client must never invent others.
const DOCUMENTED = [
  /^\/api\/auth\/login$/,
  /^\/api\/plugins(\?category=[a-z]+)?$/,
  /^\/api\/admin\/plugins$/,
  /^\/api\/admin\/backends$/,
  /^\/api\/admin\/backends\/[^/]+\/reconcile$/,
  /^\/api\/ostp\/[^/]+\/[^/]+\/jobs(\?timeout_s=\d+)?$/,
  /^\/api\/ostp\/jobs\/[^/]+\/outputs\/[^/]+$/,
  /^\/api\/projects$/,
  /^\/api\/projects\/[^/]+\/roles$/,
  /^\/api\/profile$/,
  /^\/api\/profile\/import$/,
];

describe("PortalApi", () => {
  it("touches only documented endpoints", async () => {
    const { api, calls } = capturingApi({
      token: "t",
      expires_at: 9e9,
      scopes: [],
      user_id: "u",
      username: "ada",
      profile: {},
      plugin: {},
      validation: { ok: true, findings: [] },
      reconciled: [],
    });
    await api.login("ada", "pw");
    await api.listPlugins();
    await api.listPlugins("ostp");
    await api.uploadPlugin(new Uint8Array([31, 139]));
    await api.listBackends();
    await api.reconcile("b-1");
    await api.runJob("line-sort", "1.0.0", {}, []);
    await api.jobOutput("j-1", "b.txt");
    await api.listProjects();
    await api.createProject("demo");
    await api.setRole("p-1", "gale", "guest");
    await api.profile();
    await api.importProfile("chirper", "grant-1");

    for (const call of calls) {
      const path = call.url.replace("http://portal", "");
      const known = DOCUMENTED.some((pattern) => pattern.test(path));
      expect(known, `undocumented endpoint ${path}`).toBe(true);
    }
  });

  it("sends the session token on every authenticated call", async () => {
    const { api, calls } = capturingApi([]);
    await api.listBackends();
    await api.listProjects();
    for (const call of calls) {
      expect(call.headers["X-SSELab-Token"]).toBe("tok-9");
    }
  });

  it("rebuilds typed errors from the error envelope", async () => {
    const { api } = capturingApi(
      {
        error: "ValidationFailed",
        message: "plugin failed validation",
        detail: { ok: false, findings: [{ code: "E_NOT_HEADLESS" }] },
      },
      422,
    );
    const err = await api.listBackends().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("ValidationFailed");
    expect(err.status).toBe(422);
    expect(err.detail.findings[0].code).toBe("E_NOT_HEADLESS");
  });

  it("keeps a readable error for non-JSON bodies", async () => {
    const fetchImpl = async () => new Response("boom", { status: 502 });
    const api = new PortalApi(fetchImpl, "", () => null);
    const err = await api.listProjects().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("HttpError");
    expect(err.status).toBe(502);
  });

  it("uploads plugin archives as raw gzip bytes", async () => {
    const { api, calls } = capturingApi({
      plugin: {},
      validation: { ok: true, findings: [] },
      reconciled: [],
    });
    const archive = new Uint8Array([31, 139, 8, 0, 1]);
    await api.uploadPlugin(archive);
    expect(calls[0].headers["Content-Type"]).toBe("application/gzip");
    expect(calls[0].body).toBe(archive);
  });
});

describe("encodeJobBody", () => {
  const decoder = new TextDecoder("latin1");

  it("writes the params part with no filename", () => {
    const { contentType, body } = encodeJobBody({ order: "desc" }, []);
    const boundary = contentType.split("boundary=")[1];
    const text = decoder.decode(body);
    expect(text).toContain(`--${boundary}\r\n`);
    expect(text).toContain('Content-Disposition: form-data; name="params"\r\n');
    expect(text).toContain('{"order":"desc"}');
    expect(text).not.toContain('name="params"; filename');
    expect(text.endsWith(`--${boundary}--\r\n`)).toBe(true);
  });

  it("carries arbitrary bytes through file parts intact", () => {
    const data = new Uint8Array(256);
    for (let i = 0; i < 256; i++) {
      data[i] = i;
    }
    const { body } = encodeJobBody({}, [{ name: "blob.bin", data }]);
    const text = decoder.decode(body);
    const header = 'filename="blob.bin"\r\nContent-Type: application/octet-stream\r\n\r\n';
    const start = text.indexOf(header) + header.length;
    expect(start).toBeGreaterThan(header.length);
    expect(Array.from(body.slice(start, start + 256))).toEqual(
      Array.from(data),
    );
  });

  it("names every file part 'file'", () => {
    const { body } = encodeJobBody({}, [
      { name: "a.txt", data: new Uint8Array([65]) },
      { name: "b.txt", data: new Uint8Array([66]) },
    ]);
    const text = decoder.decode(body);
    const matches = text.match(/name="file"; filename="[ab]\.txt"/g);
    expect(matches).toHaveLength(2);
  });
});
