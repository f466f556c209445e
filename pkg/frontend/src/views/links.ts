import { ApiError, LinkView, getLinks, postLinkVerdict } from "../api.js";
import { clear, el, firstLine, shortHash } from "../dom.js";
import { ViewState, validatorName } from "../state.js";

function verdictBadge(verdict: string): HTMLElement {
  return el("span", { class: `badge verdict-${verdict}` }, verdict);
}

function linkRow(link: LinkView, state: ViewState): HTMLElement {
  const badge = el("span", {}, verdictBadge(link.verdict));
  const error = el("span", { class: "error inline", hidden: true });
  const accept = el("button", { class: "accept" }, "accept");
  const reject = el("button", { class: "reject" }, "reject");

  async function decide(value: "valid" | "invalid"): Promise<void> {
    const validator = validatorName(state);
    if (!validator) return;
    error.hidden = true;
    accept.disabled = true;
    reject.disabled = true;
    try {
      const updated = await state.track("link_verdict", link.id,
        () => postLinkVerdict(link.id, value, validator));
      clear(badge);
      badge.append(verdictBadge(updated.verdict));
    } catch (err) {
      // the row stays editable; the message sits next to the buttons
      error.textContent = err instanceof ApiError
        ? `${err.code}: ${err.message}` : String(err);
      error.hidden = false;
    } finally {
      accept.disabled = false;
      reject.disabled = false;
    }
  }

  accept.addEventListener("click", () => void decide("valid"));
  reject.addEventListener("click", () => void decide("invalid"));

  const commitCell = link.commit
    ? el("a", { href: `#/hunks/${link.commit.revision_hash}`, class: "hash" },
        shortHash(link.commit.revision_hash))
    : el("span", { class: "muted" }, "(missing)");
  const issueCell = link.issue
    ? el("a", { href: `#/issues/${link.issue_id}` }, link.issue.external_id)
    : el("span", { class: "muted" }, "(missing)");

  return el("tr", { class: "link-row", "data-link-id": link.id },
    el("td", {}, commitCell),
    el("td", { class: "message" }, link.commit ? firstLine(link.commit.message) : ""),
    el("td", {}, issueCell),
    el("td", {}, link.issue?.title ?? ""),
    el("td", { class: "muted" },
      `${link.approach} s:${link.syntactic_confidence} m:${link.semantic_confidence}`),
    el("td", {}, badge),
    el("td", { class: "controls" }, accept, reject, error),
  );
}

export async function renderLinks(
  root: HTMLElement, project: string, state: ViewState,
): Promise<void> {
  clear(root);
  const statusSelect = el("select", {},
    el("option", { value: "unvalidated" }, "unvalidated"),
    el("option", { value: "" }, "all"),
    el("option", { value: "valid" }, "valid"),
    el("option", { value: "invalid" }, "invalid"),
  );
  const body = el("tbody", {});
  const table = el("table", { class: "links-table" },
    el("thead", {},
      el("tr", {},
        el("th", {}, "commit"), el("th", {}, "message"), el("th", {}, "issue"),
        el("th", {}, "title"), el("th", {}, "confidence"), el("th", {}, "verdict"),
        el("th", {}, ""))),
    body,
  );
  const empty = el("p", { class: "muted empty-state", hidden: true },
    "Nothing to review here.");

  async function refresh(): Promise<void> {
    clear(body);
    empty.hidden = true;
    const links = await getLinks(project, statusSelect.value || undefined);
    if (links.length === 0) {
      empty.hidden = false;
      table.hidden = true;
      return;
    }
    table.hidden = false;
    for (const link of links) body.append(linkRow(link, state));
  }

  statusSelect.addEventListener("change", () => void refresh());
  root.append(
    el("h2", {}, "Link review"),
    el("div", { class: "toolbar" }, el("label", {}, "status "), statusSelect),
    table,
    empty,
  );
  await refresh();
}
