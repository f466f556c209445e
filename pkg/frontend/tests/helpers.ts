/** Shared test scaffolding: a recording fetch stub and view fixtures. */

import { vi } from "vitest";
import type { Graph, HunkView, IssueView, LinkView } from "../src/api.js";

export interface RecordedCall {
  method: string;
  url: string;
  body: unknown;
  headers: Record<string, string>;
}

export interface Reply {
  status?: number;
  json?: unknown;
}

/** Replace global fetch with a stub driven by `route`. Returns the call log;
 * filter it with posts() to count writes. The stub honors promises from the
 * route, so tests can hold a response open with a deferred. */
export function stubFetch(
  route: (call: RecordedCall) => Reply | Promise<Reply>,
): RecordedCall[] {
  const calls: RecordedCall[] = [];
  vi.stubGlobal("fetch", vi.fn(async (input: unknown, init?: RequestInit) => {
    const call: RecordedCall = {
      method: init?.method ?? "GET",
      url: String(input),
      body: typeof init?.body === "string" ? JSON.parse(init.body) : undefined,
      headers: (init?.headers as Record<string, string>) ?? {},
    };
    calls.push(call);
    const reply = await route(call);
    const status = reply.status ?? 200;
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => reply.json ?? null,
    };
  }));
  return calls;
}

export function posts(calls: RecordedCall[]): RecordedCall[] {
  return calls.filter((call) => call.method === "POST");
}

/** Let queued promise chains run to completion. */
export async function flush(rounds = 4): Promise<void> {
  for (let i = 0; i < rounds; i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

export function mount(): HTMLElement {
  const root = document.createElement("div");
  document.body.append(root);
  return root;
}

export const REV = "aaaabbbbccccddddeeeeffff0000111122223333";

export function linkView(over: Partial<LinkView> = {}): LinkView {
  return {
    id: "L1",
    commit_id: "C1",
    issue_id: "I1",
    approach: "id_pattern",
    syntactic_confidence: 2,
    semantic_confidence: 1,
    verdict: "unvalidated",
    validator: null,
    validated_at: null,
    commit: {
      revision_hash: REV,
      message: "Fixed DEMO-1: correct total\n\nlonger body",
      committer_date: "2024-03-05 10:00:00",
    },
    issue: {
      external_id: "DEMO-1",
      title: "total is wrong",
      issue_type: "bug",
      issue_type_validated: null,
    },
    ...over,
  };
}

export function issueView(over: Partial<IssueView> = {}): IssueView {
  return {
    id: "I1",
    external_id: "DEMO-1",
    title: "total is wrong",
    description: "calculator returns the wrong total",
    issue_type: "bug",
    issue_type_validated: null,
    created_at: "2024-03-02 09:00:00",
    comments: [],
    linked_commits: [
      { revision_hash: REV, message: "Fixed DEMO-1: correct total", link_id: "L1", verdict: "unvalidated" },
    ],
    tracker_url: "https://tracker.example.org/browse/DEMO-1",
    ...over,
  };
}

export function hunkView(over: Partial<HunkView> = {}): HunkView {
  return {
    id: "H1",
    file_action_id: "FA1",
    old_start: 3,
    old_lines: 1,
    new_start: 10,
    new_lines: 3,
    content: " context\n-    return 1 + 1;\n+    return 2;\n+    // checked\n trailing\n",
    line_labels: {},
    path: "calc.java",
    mode: "M",
    ...over,
  };
}

export function chainGraph(count: number): Graph {
  const nodes = [];
  const edges: [string, string][] = [];
  for (let i = 0; i < count; i += 1) {
    const hash = `rev${String(i).padStart(6, "0")}${"0".repeat(31)}`;
    nodes.push({
      revision_hash: hash,
      message: `change ${i}`,
      committer_date: `2024-01-01 00:${String(i % 60).padStart(2, "0")}:00`,
      branches: i === count - 1 ? ["master"] : [],
      labels: {},
      is_merge: false,
    });
    if (i > 0) edges.push([hash, nodes[i - 1].revision_hash]);
  }
  return { nodes, edges };
}
