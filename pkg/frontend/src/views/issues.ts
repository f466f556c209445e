import { ApiError, ISSUE_TYPES, IssueView, getIssue, getLinks, postIssueType } from "../api.js";
import { clear, el, firstLine, shortHash } from "../dom.js";
import { ViewState, validatorName } from "../state.js";

function typeBadge(issue: IssueView): HTMLElement {
  const wrap = el("span", { class: "type-badges" },
    el("span", { class: "badge" }, `developer: ${issue.issue_type ?? "none"}`));
  if (issue.issue_type_validated) {
    wrap.append(" ", el("span", { class: "badge validated" },
      `validated: ${issue.issue_type_validated}`));
  }
  return wrap;
}

function issueDetail(issue: IssueView, state: ViewState): HTMLElement {
  // title doubles as the outbound tracker link when the tracker is reachable
  const title = issue.tracker_url
    ? el("a", { href: issue.tracker_url, target: "_blank", rel: "noopener", class: "issue-title" },
        `${issue.external_id}: ${issue.title}`)
    : el("span", { class: "issue-title" }, `${issue.external_id}: ${issue.title}`);

  const commitSection = el("ul", { class: "linked-commits" });
  if (issue.linked_commits.length === 0) {
    commitSection.append(el("li", { class: "muted" }, "no linked commits"));
  } else {
    for (const linked of issue.linked_commits) {
      commitSection.append(
        el("li", {},
          el("a", { href: `#/hunks/${linked.revision_hash}`, class: "hash" },
            shortHash(linked.revision_hash)),
          ` ${firstLine(linked.message)} `,
          el("span", { class: `badge verdict-${linked.verdict}` }, linked.verdict)),
      );
    }
  }

  const typeSelect = el("select", { class: "type-select" });
  for (const name of ISSUE_TYPES) {
    const option = el("option", { value: name }, name);
    if (name === (issue.issue_type_validated ?? issue.issue_type)) {
      option.selected = true;
    }
    typeSelect.append(option);
  }
  const confirm = el("input", { type: "checkbox", id: "confirm-type" });
  const submit = el("button", { class: "primary", disabled: true }, "save classification");
  const error = el("p", { class: "error", hidden: true });
  const badges = el("div", {}, typeBadge(issue));

  confirm.addEventListener("change", () => {
    submit.disabled = !confirm.checked;
  });
  submit.addEventListener("click", () => {
    // the checkbox gate is client-side: no request leaves without it
    if (!confirm.checked) return;
    const validator = validatorName(state);
    if (!validator) return;
    error.hidden = true;
    submit.disabled = true;
    void state.track("issue_type", issue.id,
      () => postIssueType(issue.id, typeSelect.value, validator))
      .then((updated) => {
        clear(badges);
        badges.append(typeBadge(updated));
        confirm.checked = false;
      })
      .catch((err) => {
        error.textContent = err instanceof ApiError
          ? `${err.code}: ${err.message}` : String(err);
        error.hidden = false;
        submit.disabled = !confirm.checked;
      });
  });

  return el("article", { class: "issue-detail", "data-issue-id": issue.id },
    el("h3", {}, title),
    badges,
    el("pre", { class: "issue-description" },
      issue.description || "(no description)"),
    el("h4", {}, "Linked commits"),
    commitSection,
    el("h4", {}, "Reclassify"),
    el("div", { class: "type-form" },
      typeSelect,
      el("label", { class: "confirm-label", for: "confirm-type" },
        confirm, " I have validated this type"),
      submit),
    error,
  );
}

export async function renderIssues(
  root: HTMLElement, project: string, state: ViewState, issueId?: string,
): Promise<void> {
  clear(root);
  root.append(el("h2", {}, "Issue review"));
  const pane = el("div", { class: "issue-pane" });

  // the service exposes issues through links and by id; build the picker
  // from the link listing, which covers everything reachable for review
  const links = await getLinks(project);
  const seen = new Map<string, string>();
  for (const link of links) {
    if (link.issue && !seen.has(link.issue_id)) {
      seen.set(link.issue_id, link.issue.external_id);
    }
  }
  const picker = el("ul", { class: "issue-picker" });
  for (const [id, externalId] of [...seen.entries()].sort((a, b) =>
    a[1].localeCompare(b[1]))) {
    picker.append(el("li", {}, el("a", { href: `#/issues/${id}` }, externalId)));
  }
  if (seen.size === 0) {
    picker.append(el("li", { class: "muted" }, "no linked issues yet"));
  }

  root.append(el("div", { class: "issue-layout" },
    el("nav", { class: "issue-nav" }, picker), pane));

  const selected = issueId ?? [...seen.keys()][0];
  if (!selected) {
    pane.append(el("p", { class: "muted empty-state" }, "Nothing to review here."));
    return;
  }
  try {
    const issue = await getIssue(selected);
    pane.append(issueDetail(issue, state));
  } catch (err) {
    pane.append(el("p", { class: "error" },
      err instanceof ApiError ? `${err.code}: ${err.message}` : String(err)));
  }
}
