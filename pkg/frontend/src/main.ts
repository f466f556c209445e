import { apiBase, getProjects, setApiBase } from "./api.js";
import { clear, el } from "./dom.js";
import { ViewState, ViewName } from "./state.js";
import { renderDashboard } from "./views/dashboard.js";
import { renderGraph } from "./views/graph.js";
import { renderHunks } from "./views/hunks.js";
import { renderIssues } from "./views/issues.js";
import { renderLinks } from "./views/links.js";

export interface Route {
  view: ViewName;
  arg?: string;
}

export function parseRoute(hash: string): Route {
  const parts = hash.replace(/^#\/?/, "").split("/").filter(Boolean);
  const view = (parts[0] || "dashboard") as ViewName;
  if (!["dashboard", "links", "issues", "hunks", "graph"].includes(view)) {
    return { view: "dashboard" };
  }
  return { view, arg: parts.slice(1).join("/") || undefined };
}

export async function initApp(root: HTMLElement): Promise<void> {
  const state = new ViewState();
  clear(root);

  const projectSelect = el("select", { class: "project-select" });
  const main = el("main", { id: "view" });
  const apiField = el("input", {
    type: "text", class: "api-field", value: apiBase(), placeholder: "same origin",
    title: "API base URL",
  });
  apiField.addEventListener("change", () => {
    setApiBase(apiField.value.trim() || null);
    try {
      localStorage.setItem("minehub-api", apiField.value.trim());
    } catch {
      // no storage available; the override still applies for this session
    }
    void render();
  });

  const tabs: [ViewName, string][] = [
    ["dashboard", "Dashboard"],
    ["graph", "Graph"],
    ["links", "Links"],
    ["issues", "Issues"],
    ["hunks", "Hunks"],
  ];
  const nav = el("nav", { class: "tabs" });
  for (const [view, label] of tabs) {
    nav.append(el("a", { href: `#/${view}`, "data-view": view }, label));
  }

  root.append(
    el("header", { class: "topbar" },
      el("span", { class: "brand" }, "minehub review"),
      nav,
      el("span", { class: "spacer" }),
      el("label", { class: "muted" }, "project "), projectSelect,
      el("label", { class: "muted" }, " api "), apiField),
    main,
  );

  projectSelect.addEventListener("change", () => {
    state.project = projectSelect.value || null;
    void render();
  });

  async function loadProjects(): Promise<void> {
    clear(projectSelect);
    try {
      const projects = await getProjects();
      for (const project of projects) {
        projectSelect.append(el("option", { value: project.name }, project.name));
      }
      if (!state.project && projects.length > 0) state.project = projects[0].name;
      if (state.project) projectSelect.value = state.project;
    } catch {
      projectSelect.append(el("option", { value: "" }, "(unreachable)"));
    }
  }

  async function render(): Promise<void> {
    const route = parseRoute(location.hash);
    state.view = route.view;
    for (const anchor of nav.querySelectorAll("a")) {
      anchor.classList.toggle("active", anchor.dataset["view"] === route.view);
    }
    clear(main);
    try {
      if (route.view === "hunks") {
        await renderHunks(main, state, route.arg);
        return;
      }
      if (!state.project) {
        main.append(el("p", { class: "muted" },
          "No projects in the store yet. Harvest something first."));
        return;
      }
      switch (route.view) {
        case "dashboard":
          await renderDashboard(main, state.project);
          break;
        case "graph":
          await renderGraph(main, state.project);
          break;
        case "links":
          await renderLinks(main, state.project, state);
          break;
        case "issues":
          await renderIssues(main, state.project, state, route.arg);
          break;
      }
    } catch (err) {
      clear(main);
      main.append(el("p", { class: "error" }, String(err)));
    }
  }

  let lastHash = location.hash;
  window.addEventListener("hashchange", () => {
    if (location.hash === lastHash) return;
    if (!state.confirmLeave()) {
      // revert without touching lastHash; the equality check above then
      // swallows the echo event instead of prompting again
      location.hash = lastHash;
      return;
    }
    lastHash = location.hash;
    void render();
  });

  await loadProjects();
  await render();
}

// browser entry point; tests import the pieces instead
if (typeof document !== "undefined" && document.getElementById("app")) {
  void initApp(document.getElementById("app") as HTMLElement);
}
