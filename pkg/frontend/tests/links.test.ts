import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { ViewState } from "../src/state.js";
import { renderLinks } from "../src/views/links.js";
import { flush, linkView, mount, posts, stubFetch } from "./helpers.js";

beforeEach(() => {
  localStorage.clear();
  localStorage.setItem("minehub-validator", "dev");
  document.body.innerHTML = "";
});

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("link review", () => {
  it("lists pending links with commit and issue references", async () => {
    const calls = stubFetch(() => ({ json: [linkView(), linkView({ id: "L2", verdict: "valid" })] }));
    const root = mount();
    await renderLinks(root, "demo", new ViewState());

    expect(calls[0].url).toBe("/api/links?project=demo&status=unvalidated");
    const rows = root.querySelectorAll<HTMLTableRowElement>("tr.link-row");
    expect(rows).toHaveLength(2);

    const first = rows[0];
    const commitLink = first.querySelector("a.hash") as HTMLAnchorElement;
    expect(commitLink.getAttribute("href"))
      .toBe("#/hunks/aaaabbbbccccddddeeeeffff0000111122223333");
    expect(commitLink.textContent).toBe("aaaabbbbcc");
    expect(first.cells[1].textContent).toBe("Fixed DEMO-1: correct total");
    expect(first.querySelector("a[href='#/issues/I1']")?.textContent).toBe("DEMO-1");
    expect(first.querySelector(".badge")?.className).toBe("badge verdict-unvalidated");
    expect(rows[1].querySelector(".badge")?.className).toBe("badge verdict-valid");
  });

  it("accepts a link with exactly one write and shows the server's verdict", async () => {
    const calls = stubFetch((call) => call.method === "POST"
      ? { json: linkView({ verdict: "valid", validator: "dev" }) }
      : { json: [linkView()] });
    const root = mount();
    await renderLinks(root, "demo", new ViewState());

    (root.querySelector("button.accept") as HTMLButtonElement).click();
    await flush();

    const writes = posts(calls);
    expect(writes).toHaveLength(1);
    expect(writes[0].url).toBe("/api/links/L1/verdict");
    expect(writes[0].body).toEqual({ value: "valid", validator: "dev" });
    expect(root.querySelector("tr.link-row .badge")?.className).toBe("badge verdict-valid");
  });

  it("rejects a link with exactly one write", async () => {
    const calls = stubFetch((call) => call.method === "POST"
      ? { json: linkView({ verdict: "invalid", validator: "dev" }) }
      : { json: [linkView()] });
    const root = mount();
    await renderLinks(root, "demo", new ViewState());

    (root.querySelector("button.reject") as HTMLButtonElement).click();
    await flush();

    const writes = posts(calls);
    expect(writes).toHaveLength(1);
    expect(writes[0].body).toEqual({ value: "invalid", validator: "dev" });
    expect(root.querySelector("tr.link-row .badge")?.className).toBe("badge verdict-invalid");
  });

  it("keeps the row editable and shows the error inline when the server refuses", async () => {
    const calls = stubFetch((call) => call.method === "POST"
      ? { status: 404, json: { code: "not_found", message: "no link L1" } }
      : { json: [linkView()] });
    const root = mount();
    await renderLinks(root, "demo", new ViewState());

    const reject = root.querySelector("button.reject") as HTMLButtonElement;
    reject.click();
    await flush();

    expect(posts(calls)).toHaveLength(1);
    const row = root.querySelector("tr.link-row") as HTMLTableRowElement;
    expect(row).not.toBeNull();
    const error = row.querySelector(".error") as HTMLElement;
    expect(error.hidden).toBe(false);
    expect(error.textContent).toBe("not_found: no link L1");
    expect(reject.disabled).toBe(false);
    expect((row.querySelector("button.accept") as HTMLButtonElement).disabled).toBe(false);
    // verdict unchanged: the server never acknowledged a write
    expect(row.querySelector(".badge")?.className).toBe("badge verdict-unvalidated");
  });

  it("does not write without a validator name", async () => {
    localStorage.clear();
    vi.stubGlobal("prompt", vi.fn(() => ""));
    const calls = stubFetch(() => ({ json: [linkView()] }));
    const root = mount();
    await renderLinks(root, "demo", new ViewState());

    (root.querySelector("button.accept") as HTMLButtonElement).click();
    await flush();
    expect(posts(calls)).toHaveLength(0);
  });

  it("refetches when the status filter changes", async () => {
    const calls = stubFetch(() => ({ json: [linkView()] }));
    const root = mount();
    await renderLinks(root, "demo", new ViewState());

    const select = root.querySelector("select") as HTMLSelectElement;
    select.value = "valid";
    select.dispatchEvent(new Event("change"));
    await flush();
    expect(calls[1].url).toBe("/api/links?project=demo&status=valid");

    select.value = "";
    select.dispatchEvent(new Event("change"));
    await flush();
    expect(calls[2].url).toBe("/api/links?project=demo");
  });

  it("shows an empty state instead of a bare table", async () => {
    stubFetch(() => ({ json: [] }));
    const root = mount();
    await renderLinks(root, "demo", new ViewState());

    const empty = root.querySelector(".empty-state") as HTMLElement;
    expect(empty.hidden).toBe(false);
    expect(empty.textContent).toBe("Nothing to review here.");
    expect((root.querySelector("table") as HTMLElement).hidden).toBe(true);
  });
});
