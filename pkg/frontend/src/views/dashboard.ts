import { getStats } from "../api.js";
import { clear, el } from "../dom.js";

const CARDS: [keyof Awaited<ReturnType<typeof getStats>>, string][] = [
  ["commits", "commits"],
  ["issues", "issues"],
  ["files", "files"],
  ["links", "commit/issue links"],
  ["validated_links", "validated links"],
  ["identities", "identities"],
];

export async function renderDashboard(root: HTMLElement, project: string): Promise<void> {
  clear(root);
  root.append(el("p", { class: "muted" }, "Loading stats..."));
  const stats = await getStats(project);
  clear(root);

  const grid = el("div", { class: "stat-grid" });
  for (const [key, label] of CARDS) {
    grid.append(
      el("div", { class: "stat-card" },
        el("div", { class: "stat-value" }, String(stats[key])),
        el("div", { class: "stat-label" }, label)),
    );
  }

  const coverage = stats.links === 0
    ? "no links recovered yet"
    : `${stats.validated_links} of ${stats.links} links validated`;
  root.append(
    el("h2", {}, `Project: ${project}`),
    grid,
    el("p", { class: "muted" }, coverage),
  );
}
