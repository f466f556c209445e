import {
  ApiError,
  HunkView,
  LINE_LABELS,
  LineLabel,
  getCommit,
  getCommitHunks,
  postLineLabel,
} from "../api.js";
import { clear, el, firstLine, shortHash } from "../dom.js";
import { ViewState, validatorName } from "../state.js";

/** A click moves the line to the label after its current one; unlabeled
 * lines start the cycle at bugfix (red), the common case. */
export function nextLabel(current: string | undefined): LineLabel {
  const at = LINE_LABELS.indexOf(current as LineLabel);
  return LINE_LABELS[(at + 1) % LINE_LABELS.length];
}

interface DiffLine {
  text: string;
  kind: "add" | "del" | "ctx";
  newNo: number | null;
}

export function diffLines(hunk: HunkView): DiffLine[] {
  const out: DiffLine[] = [];
  let newNo = hunk.new_start;
  const raw = hunk.content.endsWith("\n") ? hunk.content.slice(0, -1) : hunk.content;
  if (!raw) return out;
  for (const line of raw.split("\n")) {
    if (line.startsWith("+")) {
      out.push({ text: line, kind: "add", newNo });
      newNo += 1;
    } else if (line.startsWith("-")) {
      out.push({ text: line, kind: "del", newNo: null });
    } else {
      out.push({ text: line, kind: "ctx", newNo });
      newNo += 1;
    }
  }
  return out;
}

function gutterCell(
  hunk: HunkView, lineNo: number, state: ViewState, error: HTMLElement,
): HTMLElement {
  let label = hunk.line_labels[String(lineNo)];
  const cell = el("td", {
    class: `gutter ${label ? `label-${label}` : ""}`,
    "data-line": String(lineNo),
    title: "click to cycle the label",
  }, label ?? "");

  cell.addEventListener("click", () => {
    const validator = validatorName(state);
    if (!validator) return;
    const previous = label;
    const wanted = nextLabel(label);
    // optimistic: paint first, roll back if the server says no
    label = wanted;
    cell.className = `gutter label-${wanted}`;
    cell.textContent = wanted;
    error.hidden = true;
    void state.track("hunk_line", `${hunk.id}:${lineNo}`,
      () => postLineLabel(hunk.id, lineNo, wanted, validator))
      .then((updated) => {
        label = updated.line_labels[String(lineNo)];
        cell.className = `gutter ${label ? `label-${label}` : ""}`;
        cell.textContent = label ?? "";
      })
      .catch((err) => {
        label = previous;
        cell.className = `gutter ${previous ? `label-${previous}` : ""}`;
        cell.textContent = previous ?? "";
        error.textContent = err instanceof ApiError
          ? `${err.code}: ${err.message}` : String(err);
        error.hidden = false;
      });
  });
  return cell;
}

function hunkTable(hunk: HunkView, state: ViewState, error: HTMLElement): HTMLElement {
  const body = el("tbody", {});
  for (const line of diffLines(hunk)) {
    const gutter = line.newNo === null
      ? el("td", { class: "gutter disabled" })
      : gutterCell(hunk, line.newNo, state, error);
    body.append(
      el("tr", { class: `diff-${line.kind}` },
        gutter,
        el("td", { class: "lineno" }, line.newNo === null ? "" : String(line.newNo)),
        el("td", { class: "code" }, line.text)),
    );
  }
  return el("table", { class: "hunk", "data-hunk-id": hunk.id },
    el("caption", {},
      `@@ -${hunk.old_start},${hunk.old_lines} +${hunk.new_start},${hunk.new_lines} @@`),
    body);
}

export async function renderHunks(
  root: HTMLElement, state: ViewState, revision?: string,
): Promise<void> {
  clear(root);
  root.append(el("h2", {}, "Hunk labeling"));

  const revInput = el("input", {
    type: "search", placeholder: "revision hash", class: "rev-input",
    value: revision ?? "",
  });
  revInput.addEventListener("change", () => {
    if (revInput.value.trim()) location.hash = `#/hunks/${revInput.value.trim()}`;
  });
  root.append(el("div", { class: "toolbar" },
    el("label", {}, "commit "), revInput));

  if (!revision) {
    root.append(el("p", { class: "muted" },
      "Open a commit from the links, issues, or graph view, or paste a hash."));
    return;
  }

  const error = el("p", { class: "error", hidden: true });
  try {
    const [commit, hunks] = await Promise.all([
      getCommit(revision), getCommitHunks(revision),
    ]);
    root.append(
      el("div", { class: "commit-head" },
        el("span", { class: "hash" }, shortHash(commit.revision_hash)),
        el("strong", {}, ` ${firstLine(commit.message)} `),
        el("span", { class: "muted" },
          `${commit.author?.name ?? "?"} on ${commit.committer_date}`)),
      error,
    );
    if (hunks.length === 0) {
      root.append(el("p", { class: "muted empty-state" },
        "No textual changes recorded for this commit."));
      return;
    }
    let currentPath: string | null = null;
    for (const hunk of hunks) {
      if (hunk.path !== currentPath) {
        currentPath = hunk.path;
        root.append(el("h3", { class: "diff-path" }, currentPath ?? "(unknown file)"));
      }
      root.append(hunkTable(hunk, state, error));
    }
    root.append(el("p", { class: "muted legend" },
      "Gutter colors: ",
      el("span", { class: "badge label-bugfix" }, "bugfix"), " ",
      el("span", { class: "badge label-refactoring" }, "refactoring"), " ",
      el("span", { class: "badge label-unrelated" }, "unrelated"), " ",
      el("span", { class: "badge label-whitespace" }, "whitespace"), " ",
      el("span", { class: "badge label-documentation" }, "documentation")));
  } catch (err) {
    root.append(el("p", { class: "error" },
      err instanceof ApiError ? `${err.code}: ${err.message}` : String(err)));
  }
}
