/** Client-side session state. The server is the source of truth for all
 * validation data; the only thing tracked here is which project and view
 * are active, who is validating, and which writes are still in flight. */

export type ViewName = "dashboard" | "links" | "issues" | "hunks" | "graph";

export interface PendingWrite {
  kind: "link_verdict" | "issue_type" | "hunk_line";
  target: string;
}

export class ViewState {
  project: string | null = null;
  view: ViewName = "dashboard";
  validator = "";
  private readonly inflight: PendingWrite[] = [];

  get pending(): readonly PendingWrite[] {
    return this.inflight;
  }

  hasPending(): boolean {
    return this.inflight.length > 0;
  }

  /** Register a write the server has not acknowledged yet. The entry leaves
   * the list only through settle(), i.e. after the response arrived. */
  begin(kind: PendingWrite["kind"], target: string): PendingWrite {
    const entry: PendingWrite = { kind, target };
    this.inflight.push(entry);
    return entry;
  }

  settle(entry: PendingWrite): void {
    const at = this.inflight.indexOf(entry);
    if (at >= 0) this.inflight.splice(at, 1);
  }

  /** Run a mutation with pending-list bookkeeping. The entry is settled on
   * success and on failure alike: both are acknowledgements. */
  async track<T>(kind: PendingWrite["kind"], target: string, op: () => Promise<T>): Promise<T> {
    const entry = this.begin(kind, target);
    try {
      return await op();
    } finally {
      this.settle(entry);
    }
  }

  /** Navigation guard: true when it is safe to leave the current view. */
  confirmLeave(ask: (message: string) => boolean = (m) => globalThis.confirm(m)): boolean {
    if (!this.hasPending()) return true;
    return ask(
      `${this.inflight.length} validation write(s) are still being saved. Leave anyway?`,
    );
  }
}

export function validatorName(state: ViewState): string {
  if (state.validator.trim()) return state.validator.trim();
  try {
    const stored = globalThis.localStorage?.getItem("minehub-validator");
    if (stored?.trim()) {
      state.validator = stored.trim();
      return state.validator;
    }
  } catch {
    // no storage; fall through to the prompt
  }
  const answer = globalThis.prompt?.("Your name (recorded with every validation):") ?? "";
  state.validator = answer.trim();
  if (state.validator) {
    try {
      globalThis.localStorage?.setItem("minehub-validator", state.validator);
    } catch {
      // best effort only
    }
  }
  return state.validator;
}
