/** Typed client for the review service. All network traffic goes through
 * request(); nothing else in the app touches fetch. */

export interface ProjectRef {
  id: string;
  name: string;
}

export interface Stats {
  commits: number;
  issues: number;
  files: number;
  links: number;
  validated_links: number;
  identities: number;
}

export interface GraphNode {
  revision_hash: string;
  message: string;
  committer_date: string;
  branches: string[];
  labels: Record<string, unknown>;
  is_merge: boolean;
}

export interface Graph {
  nodes: GraphNode[];
  edges: [string, string][];
}

export interface LinkView {
  id: string;
  commit_id: string;
  issue_id: string;
  approach: string;
  syntactic_confidence: number;
  semantic_confidence: number;
  verdict: string;
  validator: string | null;
  validated_at: string | null;
  commit: { revision_hash: string; message: string; committer_date: string } | null;
  issue: {
    external_id: string;
    title: string;
    issue_type: string | null;
    issue_type_validated: string | null;
  } | null;
}

export interface LinkedCommit {
  revision_hash: string;
  message: string;
  link_id: string;
  verdict: string;
}

export interface IssueView {
  id: string;
  external_id: string;
  title: string;
  description: string;
  issue_type: string | null;
  issue_type_validated: string | null;
  created_at: string;
  comments: { author_person_id: string; body: string; created_at: string }[];
  linked_commits: LinkedCommit[];
  tracker_url: string | null;
}

export interface CommitAction {
  id: string;
  mode: string;
  path: string | null;
  old_path: string | null;
  lines_added: number;
  lines_deleted: number;
  is_binary: boolean;
}

export interface CommitView {
  id: string;
  revision_hash: string;
  message: string;
  committer_date: string;
  author: { name: string; email: string } | null;
  actions: CommitAction[];
}

export interface HunkView {
  id: string;
  file_action_id: string;
  old_start: number;
  old_lines: number;
  new_start: number;
  new_lines: number;
  content: string;
  line_labels: Record<string, string>;
  path: string | null;
  mode: string;
}

export const ISSUE_TYPES = [
  "bug", "improvement", "feature", "task", "documentation", "other",
] as const;

export const LINE_LABELS = [
  "bugfix", "refactoring", "unrelated", "whitespace", "documentation",
] as const;
export type LineLabel = (typeof LINE_LABELS)[number];

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

let baseOverride: string | null = null;

/** Triple fallback: explicit override (tests, settings form), a global set
 * by an optional config.js served next to the bundle, a localStorage entry,
 * then same-origin. */
export function setApiBase(url: string | null): void {
  baseOverride = url === null ? null : url.replace(/\/+$/, "");
}

export function apiBase(): string {
  if (baseOverride !== null) return baseOverride;
  const fromGlobal = (globalThis as { MINEHUB_API?: unknown }).MINEHUB_API;
  if (typeof fromGlobal === "string") return fromGlobal.replace(/\/+$/, "");
  try {
    const stored = globalThis.localStorage?.getItem("minehub-api");
    if (stored) return stored.replace(/\/+$/, "");
  } catch {
    // storage can be unavailable (sandboxed iframe); same-origin still works
  }
  return "";
}

async function request<T>(method: string, path: string, body?: unknown): Promise<T> {
  let resp: Response;
  try {
    resp = await fetch(apiBase() + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  } catch (err) {
    throw new ApiError(0, "network", `cannot reach ${apiBase() || "the API"}: ${String(err)}`);
  }
  let data: unknown = null;
  try {
    data = await resp.json();
  } catch {
    data = null;
  }
  if (!resp.ok) {
    const payload = (data ?? {}) as { code?: string; message?: string };
    throw new ApiError(
      resp.status,
      payload.code ?? "error",
      payload.message ?? `request failed with status ${resp.status}`,
    );
  }
  return data as T;
}

export function getProjects(): Promise<ProjectRef[]> {
  return request("GET", "/api/projects");
}

export function getStats(project: string): Promise<Stats> {
  return request("GET", `/api/projects/${encodeURIComponent(project)}/stats`);
}

export function getGraph(project: string, filter: string, query?: string): Promise<Graph> {
  const params = new URLSearchParams({ filter });
  if (query) params.set("q", query);
  return request("GET", `/api/projects/${encodeURIComponent(project)}/commit-graph?${params}`);
}

export function getLinks(project: string, status?: string): Promise<LinkView[]> {
  const params = new URLSearchParams({ project });
  if (status) params.set("status", status);
  return request("GET", `/api/links?${params}`);
}

export function postLinkVerdict(
  linkId: string, value: "valid" | "invalid", validator: string,
): Promise<LinkView> {
  return request("POST", `/api/links/${encodeURIComponent(linkId)}/verdict`,
    { value, validator });
}

export function getIssue(issueId: string): Promise<IssueView> {
  return request("GET", `/api/issues/${encodeURIComponent(issueId)}`);
}

export function postIssueType(
  issueId: string, validatedType: string, validator: string,
): Promise<IssueView> {
  return request("POST", `/api/issues/${encodeURIComponent(issueId)}/type`,
    { validated_type: validatedType, validator });
}

export function getCommit(revisionHash: string): Promise<CommitView> {
  return request("GET", `/api/commits/${encodeURIComponent(revisionHash)}`);
}

export function getCommitHunks(revisionHash: string): Promise<HunkView[]> {
  return request("GET", `/api/commits/${encodeURIComponent(revisionHash)}/hunks`);
}

export function postLineLabel(
  hunkId: string, lineNo: number, label: LineLabel, validator: string,
): Promise<HunkView> {
  return request("POST", `/api/hunks/${encodeURIComponent(hunkId)}/lines`,
    { line_no: lineNo, label, validator });
}
