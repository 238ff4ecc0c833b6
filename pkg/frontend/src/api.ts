import type { SessionReply } from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin wrapper over the session API; all calls go through one fetch hook so
 * tests can capture exactly what would hit the wire. */
export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<SessionReply> {
    let resp: Response;
    try {
      resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(`network error: ${String(err)}`);
    }
    if (!resp.ok) {
      throw new ApiError(`HTTP ${resp.status}`, resp.status);
    }
    return (await resp.json()) as SessionReply;
  }

  createSession(): Promise<SessionReply> {
    return this.request("/sessions", { method: "POST" });
  }

  sendText(sessionId: string, text: string): Promise<SessionReply> {
    return this.request(`/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  sendImage(
    sessionId: string,
    file: File,
    fields: { hypothesis?: string; material?: string } = {},
  ): Promise<SessionReply> {
    const form = new FormData();
    form.append("file", file, file.name);
    if (fields.hypothesis !== undefined) form.append("hypothesis", fields.hypothesis);
    if (fields.material !== undefined) form.append("material", fields.material);
    return this.request(`/sessions/${sessionId}/images`, {
      method: "POST",
      body: form,
    });
  }

  reportUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/report`;
  }
}
