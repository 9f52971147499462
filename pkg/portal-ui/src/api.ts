/**
 * Typed client for the front-end HTTP API.
 *
 * Every request the portal makes goes through this module, so the set of
 * endpoints used by the UI is exactly the set of functions below. The
 * fetch implementation is injected to keep the client testable.
 */

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export interface ParamSpec {
  name: string;
  kind: "string" | "int" | "bool" | "enum";
  required: boolean;
  default?: unknown;
  choices?: string[];
}

export interface PluginManifest {
  id: string;
  version: string;
  category: "base" | "ostp" | "social";
  display_name: string;
  description: string;
  entry: string;
  params: ParamSpec[];
  properties: {
    headless: boolean;
    runtime_deps: string[];
    supports_sso: boolean;
    access_control: string;
  };
  checksum?: string;
}

export interface ValidationFinding {
  code: string;
  severity: string;
  message: string;
}

export interface BackendRecord {
  backend_id: string;
  url: string;
  category: string;
  health: "healthy" | "degraded" | "unreachable";
  interface_version: number;
  plugins: [string, string][];
}

export interface ReconcileStep {
  id: string;
  version: string;
}

export interface ReconcileReport {
  backend_id: string;
  plan: { installs: ReconcileStep[]; removals: ReconcileStep[] };
  completed: unknown[];
  failed: unknown | null;
  noop: boolean;
  health: string;
  error?: string;
}

export interface JobResult {
  job_id: string;
  service_id: string;
  version: string;
  status: string;
  exit_code?: number;
  stdout_log: string;
  stderr_log: string;
  outputs: string[];
  duration_ms: number;
}

export interface LoginResponse {
  token: string;
  expires_at: number;
  scopes: string[];
  user_id: string;
  username: string;
}

export interface ProfileLink {
  label: string;
  url: string;
}

export interface ProfileData {
  display_name: string;
  avatar_url: string;
  interests: string[];
  links: ProfileLink[];
  source: string;
  fetched_at: number;
}

export interface ProjectMember {
  user_id: string;
  username: string;
  role: string;
}

export interface Project {
  project_id: string;
  name: string;
  members: ProjectMember[];
  services: string[];
}

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
    public detail?: unknown,
  ) {
    super(message);
  }
}

async function raiseForError(response: Response): Promise<void> {
  if (response.ok) {
    return;
  }
  let code = "HttpError";
  let message = `HTTP ${response.status}`;
  let detail: unknown;
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") {
      code = body.error;
      message = body.message ?? message;
      detail = body.detail;
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  throw new ApiError(code, message, response.status, detail);
}

/** Multipart body for a job submission: params field plus one part per file. */
export function encodeJobBody(
  params: Record<string, unknown>,
  files: { name: string; data: Uint8Array }[],
): { contentType: string; body: Uint8Array<ArrayBuffer> } {
  const boundary =
    "----sselab-" + Math.random().toString(36).slice(2) + Date.now().toString(36);
  const encoder = new TextEncoder();
  const chunks: Uint8Array[] = [];
  chunks.push(
    encoder.encode(
      `--${boundary}\r\n` +
        `Content-Disposition: form-data; name="params"\r\n` +
        `Content-Type: application/json\r\n\r\n` +
        JSON.stringify(params) +
        `\r\n`,
    ),
  );
  for (const file of files) {
    chunks.push(
      encoder.encode(
        `--${boundary}\r\n` +
          `Content-Disposition: form-data; name="file"; filename="${file.name}"\r\n` +
          `Content-Type: application/octet-stream\r\n\r\n`,
      ),
    );
    chunks.push(file.data);
    chunks.push(encoder.encode("\r\n"));
  }
  chunks.push(encoder.encode(`--${boundary}--\r\n`));
  const total = chunks.reduce((n, c) => n + c.length, 0);
  const body = new Uint8Array(total);
  let offset = 0;
  for (const chunk of chunks) {
    body.set(chunk, offset);
    offset += chunk.length;
  }
  return { contentType: `multipart/form-data; boundary=${boundary}`, body };
}

export class PortalApi {
  constructor(
    private fetchImpl: FetchLike,
    public baseUrl: string = "",
    private getToken: () => string | null = () => null,
  ) {}

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const token = this.getToken();
    return token ? { "X-SSELab-Token": token, ...extra } : { ...extra };
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      headers: this.headers(),
    });
    await raiseForError(response);
    return (await response.json()) as T;
  }

  private async postJson<T>(path: string, payload: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: this.headers({ "Content-Type": "application/json" }),
      body: JSON.stringify(payload),
    });
    await raiseForError(response);
    return (await response.json()) as T;
  }

  login(username: string, password: string): Promise<LoginResponse> {
    return this.postJson("/api/auth/login", { username, password });
  }

  listPlugins(category?: string): Promise<PluginManifest[]> {
    const query = category ? `?category=${encodeURIComponent(category)}` : "";
    return this.getJson(`/api/plugins${query}`);
  }

  async uploadPlugin(archive: Uint8Array<ArrayBuffer>): Promise<{
    plugin: PluginManifest;
    validation: { ok: boolean; findings: ValidationFinding[] };
    reconciled: ReconcileReport[];
  }> {
    const response = await this.fetchImpl(this.baseUrl + "/api/admin/plugins", {
      method: "POST",
      headers: this.headers({ "Content-Type": "application/gzip" }),
      body: archive,
    });
    await raiseForError(response);
    return await response.json();
  }

  listBackends(): Promise<BackendRecord[]> {
    return this.getJson("/api/admin/backends");
  }

  reconcile(backendId: string): Promise<ReconcileReport> {
    return this.postJson(
      `/api/admin/backends/${encodeURIComponent(backendId)}/reconcile`,
      {},
    );
  }

  async runJob(
    serviceId: string,
    version: string,
    params: Record<string, unknown>,
    files: { name: string; data: Uint8Array }[],
    timeoutS?: number,
  ): Promise<JobResult> {
    const encoded = encodeJobBody(params, files);
    const query = timeoutS ? `?timeout_s=${timeoutS}` : "";
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/ostp/${encodeURIComponent(serviceId)}/` +
        `${encodeURIComponent(version)}/jobs${query}`,
      {
        method: "POST",
        headers: this.headers({ "Content-Type": encoded.contentType }),
        body: encoded.body,
      },
    );
    await raiseForError(response);
    return await response.json();
  }

  async jobOutput(jobId: string, name: string): Promise<Uint8Array> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/ostp/jobs/${encodeURIComponent(jobId)}/outputs/${name}`,
      { headers: this.headers() },
    );
    await raiseForError(response);
    return new Uint8Array(await response.arrayBuffer());
  }

  outputUrl(jobId: string, name: string): string {
    return `${this.baseUrl}/api/ostp/jobs/${encodeURIComponent(jobId)}/outputs/${name}`;
  }

  listProjects(): Promise<Project[]> {
    return this.getJson("/api/projects");
  }

  createProject(name: string): Promise<Project> {
    return this.postJson("/api/projects", { name });
  }

  setRole(projectId: string, username: string, role: string): Promise<Project> {
    return this.postJson(
      `/api/projects/${encodeURIComponent(projectId)}/roles`,
      { username, role },
    );
  }

  profile(): Promise<{ user: unknown; profile: ProfileData }> {
    return this.getJson("/api/profile");
  }

  async importProfile(providerId: string, grant: string): Promise<ProfileData> {
    const doc = await this.postJson<{ profile: ProfileData }>(
      "/api/profile/import",
      { provider_id: providerId, grant },
    );
    return doc.profile;
  }
}
