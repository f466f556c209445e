import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import {
  ApiError,
  apiBase,
  getGraph,
  getLinks,
  postIssueType,
  postLineLabel,
  postLinkVerdict,
  setApiBase,
} from "../src/api.js";
import { stubFetch } from "./helpers.js";

beforeEach(() => {
  setApiBase(null);
  localStorage.clear();
  delete (globalThis as { MINEHUB_API?: unknown }).MINEHUB_API;
});

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("apiBase resolution", () => {
  it("defaults to same-origin", () => {
    expect(apiBase()).toBe("");
  });

  it("prefers an explicit override and strips trailing slashes", () => {
    localStorage.setItem("minehub-api", "http://stored:3");
    setApiBase("http://override:1///");
    expect(apiBase()).toBe("http://override:1");
  });

  it("falls back to the config.js global, then localStorage", () => {
    (globalThis as { MINEHUB_API?: unknown }).MINEHUB_API = "http://global:2/";
    localStorage.setItem("minehub-api", "http://stored:3/");
    expect(apiBase()).toBe("http://global:2");
    delete (globalThis as { MINEHUB_API?: unknown }).MINEHUB_API;
    expect(apiBase()).toBe("http://stored:3");
  });

  it("prefixes every request with the base", async () => {
    setApiBase("http://api:9");
    const calls = stubFetch(() => ({ json: [] }));
    await getLinks("demo");
    expect(calls[0].url).toBe("http://api:9/api/links?project=demo");
  });
});

describe("wire format", () => {
  it("encodes list queries", async () => {
    const calls = stubFetch(() => ({ json: [] }));
    await getLinks("my project", "unvalidated");
    expect(calls[0].method).toBe("GET");
    expect(calls[0].url).toBe("/api/links?project=my+project&status=unvalidated");
    expect(calls[0].body).toBeUndefined();
  });

  it("encodes graph queries", async () => {
    const calls = stubFetch(() => ({ json: { nodes: [], edges: [] } }));
    await getGraph("demo", "message", "fix it");
    expect(calls[0].url).toBe(
      "/api/projects/demo/commit-graph?filter=message&q=fix+it");
  });

  it("sends a link verdict as a single JSON POST", async () => {
    const calls = stubFetch(() => ({ json: {} }));
    await postLinkVerdict("L1", "invalid", "zoe");
    expect(calls).toHaveLength(1);
    expect(calls[0].method).toBe("POST");
    expect(calls[0].url).toBe("/api/links/L1/verdict");
    expect(calls[0].body).toEqual({ value: "invalid", validator: "zoe" });
    expect(calls[0].headers["Content-Type"]).toBe("application/json");
  });

  it("sends an issue reclassification as a single JSON POST", async () => {
    const calls = stubFetch(() => ({ json: {} }));
    await postIssueType("I1", "improvement", "zoe");
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe("/api/issues/I1/type");
    expect(calls[0].body).toEqual({ validated_type: "improvement", validator: "zoe" });
  });

  it("sends a line label as a single JSON POST", async () => {
    const calls = stubFetch(() => ({ json: {} }));
    await postLineLabel("H1", 12, "bugfix", "zoe");
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe("/api/hunks/H1/lines");
    expect(calls[0].body).toEqual({ line_no: 12, label: "bugfix", validator: "zoe" });
  });
});

describe("error mapping", () => {
  it("raises ApiError with the server's code and message", async () => {
    stubFetch(() => ({ status: 404, json: { code: "not_found", message: "no link L9" } }));
    const failure = await getLinks("demo").catch((err) => err);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.status).toBe(404);
    expect(failure.code).toBe("not_found");
    expect(failure.message).toBe("no link L9");
  });

  it("falls back to a generic code when the error body is not JSON", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => ({
      ok: false,
      status: 502,
      json: async () => { throw new Error("not json"); },
    })));
    const failure = await getLinks("demo").catch((err) => err);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.code).toBe("error");
    expect(failure.message).toContain("502");
  });

  it("maps network failures to status 0", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => { throw new TypeError("refused"); }));
    const failure = await getLinks("demo").catch((err) => err);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.status).toBe(0);
    expect(failure.code).toBe("network");
  });
});
