import { Graph, GraphNode, getGraph } from "../api.js";
import { clear, el, firstLine, shortHash } from "../dom.js";

/** Past this many commits a full graph stops being readable (or renderable);
 * the view degrades to a chronological list. */
export const GRAPH_NODE_LIMIT = 2000;

const COLUMN = 26;
const ROW = 30;

interface Placed extends GraphNode {
  x: number;
  y: number;
}

/** Lane assignment: commits are already date-ordered; each commit takes its
 * first parent's lane when free, otherwise the lowest lane not in use. */
function layout(graph: Graph): Map<string, Placed> {
  const parentOf = new Map<string, string[]>();
  for (const [child, parent] of graph.edges) {
    const list = parentOf.get(child) ?? [];
    list.push(parent);
    parentOf.set(child, list);
  }
  const placed = new Map<string, Placed>();
  const laneOf = new Map<string, number>();
  const taken = new Set<number>();

  graph.nodes.forEach((node, index) => {
    let lane = laneOf.get(node.revision_hash);
    if (lane === undefined) {
      lane = 0;
      while (taken.has(lane)) lane += 1;
      taken.add(lane);
    }
    placed.set(node.revision_hash, { ...node, x: index * COLUMN + 14, y: lane * ROW + 16 });
    // hand the lane down to the first not-yet-placed parent
    const parents = parentOf.get(node.revision_hash) ?? [];
    let passed = false;
    for (const parent of parents) {
      if (!passed && !laneOf.has(parent) && !placed.has(parent)) {
        laneOf.set(parent, lane);
        passed = true;
      }
    }
    if (!passed) taken.delete(lane);
  });
  return placed;
}

function svgGraph(graph: Graph): SVGSVGElement {
  // nodes arrive oldest-first; draw newest on the right
  const ordered: Graph = {
    nodes: [...graph.nodes].reverse(),
    edges: graph.edges,
  };
  const placed = layout(ordered);
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  const width = ordered.nodes.length * COLUMN + 28;
  const lanes = 1 + Math.max(0, ...[...placed.values()].map((p) => (p.y - 16) / ROW));
  const height = lanes * ROW + 20;
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("class", "commit-graph");

  for (const [child, parent] of ordered.edges) {
    const a = placed.get(child);
    const b = placed.get(parent);
    if (!a || !b) continue;
    const line = document.createElementNS("http://www.w3.org/2000/svg", "line");
    line.setAttribute("x1", String(a.x));
    line.setAttribute("y1", String(a.y));
    line.setAttribute("x2", String(b.x));
    line.setAttribute("y2", String(b.y));
    line.setAttribute("class", "graph-edge");
    svg.append(line);
  }
  for (const node of placed.values()) {
    const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    dot.setAttribute("cx", String(node.x));
    dot.setAttribute("cy", String(node.y));
    dot.setAttribute("r", node.is_merge ? "7" : "5");
    dot.setAttribute("class", node.labels["bugfix"] === true
      ? "graph-node bugfix" : "graph-node");
    const title = document.createElementNS("http://www.w3.org/2000/svg", "title");
    title.textContent = `${shortHash(node.revision_hash)} ${firstLine(node.message)}`;
    dot.append(title);
    dot.addEventListener("click", () => {
      location.hash = `#/hunks/${node.revision_hash}`;
    });
    svg.append(dot);
  }
  return svg;
}

function listFallback(graph: Graph): HTMLElement {
  const list = el("ol", { class: "commit-list", reversed: true });
  for (const node of [...graph.nodes].reverse()) {
    list.append(
      el("li", {},
        el("a", { href: `#/hunks/${node.revision_hash}`, class: "hash" },
          shortHash(node.revision_hash)),
        el("span", { class: "muted" }, ` ${node.committer_date} `),
        el("span", {}, firstLine(node.message))),
    );
  }
  return list;
}

export async function renderGraph(root: HTMLElement, project: string): Promise<void> {
  clear(root);
  const filterSelect = el("select", { class: "graph-filter" },
    el("option", { value: "all" }, "all commits"),
    el("option", { value: "bugfix" }, "bugfix commits"),
    el("option", { value: "message" }, "message contains..."),
  );
  const queryInput = el("input", {
    type: "search", placeholder: "message text", class: "graph-query", hidden: true,
  });
  const errorLine = el("p", { class: "error", hidden: true });
  const canvas = el("div", { class: "graph-canvas" });

  async function refresh(): Promise<void> {
    const filter = filterSelect.value;
    queryInput.hidden = filter !== "message";
    errorLine.hidden = true;
    clear(canvas);
    if (filter === "message" && !queryInput.value.trim()) {
      canvas.append(el("p", { class: "muted" }, "Type a search term."));
      return;
    }
    canvas.append(el("p", { class: "muted" }, "Loading graph..."));
    try {
      const graph = await getGraph(project, filter, queryInput.value.trim() || undefined);
      clear(canvas);
      if (graph.nodes.length === 0) {
        canvas.append(el("p", { class: "muted" }, "No commits match."));
      } else if (graph.nodes.length > GRAPH_NODE_LIMIT) {
        canvas.append(
          el("p", { class: "muted" },
            `${graph.nodes.length} commits; showing a chronological list instead of a graph.`),
          listFallback(graph),
        );
      } else {
        canvas.append(el("div", { class: "graph-scroll" }, svgGraph(graph)));
      }
    } catch (err) {
      clear(canvas);
      errorLine.textContent = err instanceof Error ? err.message : String(err);
      errorLine.hidden = false;
    }
  }

  filterSelect.addEventListener("change", () => void refresh());
  queryInput.addEventListener("change", () => void refresh());

  root.append(
    el("h2", {}, "Commit graph"),
    el("div", { class: "toolbar" }, filterSelect, queryInput),
    errorLine,
    canvas,
  );
  await refresh();
}
