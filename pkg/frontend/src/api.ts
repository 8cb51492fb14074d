/** Typed client for the soapbench serve API.
 *
 * The fetch implementation is injectable so tests can run without a browser
 * or a live server.
 */

import type {
  AnnotationDocument,
  SaveResult,
  SessionData,
  SessionRef,
  Taxonomy,
  TokenSpan,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class NotFoundError extends Error {}
export class ApiUnreachable extends Error {}
export class ValidationRejected extends Error {
  constructor(public violations: string[]) {
    super(`annotation document rejected: ${violations.join("; ")}`);
  }
}
export class WriteConflict extends Error {}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async get(path: string): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path);
    } catch (error) {
      throw new ApiUnreachable(String(error));
    }
    if (response.status === 404) {
      throw new NotFoundError(path);
    }
    if (!response.ok) {
      throw new Error(`${path} -> ${response.status}`);
    }
    return response;
  }

  async sessions(): Promise<SessionRef[]> {
    const body = (await (await this.get("/api/sessions")).json()) as {
      sessions: SessionRef[];
    };
    return body.sessions;
  }

  async session(consultationId: string, runIndex: number): Promise<SessionData> {
    const query = `consultation=${encodeURIComponent(consultationId)}&run=${runIndex}`;
    return (await (await this.get(`/api/session?${query}`)).json()) as SessionData;
  }

  async taxonomy(): Promise<Taxonomy> {
    return (await (await this.get("/api/taxonomy")).json()) as Taxonomy;
  }

  async tokenize(text: string): Promise<TokenSpan[]> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + "/api/tokenize", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ text }),
      });
    } catch (error) {
      throw new ApiUnreachable(String(error));
    }
    if (!response.ok) {
      throw new Error(`tokenize -> ${response.status}`);
    }
    const body = (await response.json()) as { tokens: TokenSpan[] };
    return body.tokens;
  }

  async saveAnnotations(document: AnnotationDocument): Promise<SaveResult> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + "/api/annotations", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(document),
      });
    } catch (error) {
      throw new ApiUnreachable(String(error));
    }
    const body = (await response.json()) as SaveResult;
    if (response.status === 422) {
      throw new ValidationRejected(body.violations ?? []);
    }
    if (response.status === 409) {
      throw new WriteConflict(body.error ?? "file is locked");
    }
    if (!response.ok) {
      throw new Error(body.error ?? `save -> ${response.status}`);
    }
    return body;
  }
}
