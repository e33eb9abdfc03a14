/** Single-page wiring: run browser -> target editor -> search & compare.
 * All state transitions go through the pure modules (draft, poll, render);
 * this file only binds them to the DOM. */

import { ApiClient, ApiError } from "./api.js";
import type { CompiledTarget, RunSummary } from "./api.js";
import {
  isValid,
  moveFeature,
  newDraft,
  prefillFromCompiled,
  toggleSign,
  toPayload,
  type TargetDraft,
} from "./draft.js";
import { pollJob } from "./poll.js";
import {
  renderAttributionRanges,
  renderComparison,
  renderErrorBanner,
  renderJobStatus,
  renderRunList,
} from "./render.js";

interface AppState {
  run: RunSummary | null;
  draft: TargetDraft | null;
  targetId: string | null;
  compiled: CompiledTarget | null;
  searching: boolean;
}

export function mountApp(rootEl: HTMLElement, client: ApiClient): void {
  rootEl.innerHTML = `
    <div id="banner"></div>
    <section id="runs-panel"><h2>Runs</h2><div id="run-list"></div></section>
    <section id="run-panel" hidden>
      <h2 id="run-title"></h2>
      <div id="ranges"></div>
      <h2>Target editor</h2>
      <ul id="feature-list" class="reorder"></ul>
      <textarea id="pref-text" rows="3"
        placeholder="optional free-text preferences, e.g. rank: f2, f0, f1"></textarea>
      <div id="inline-error" class="inline-error"></div>
      <button id="submit-target">Submit target</button>
      <div id="compiled-echo"></div>
      <button id="run-search" hidden>Run search</button>
      <div id="job-status"></div>
      <div id="comparison"></div>
      <button id="refine" hidden>Refine preferences</button>
    </section>`;

  const el = <T extends HTMLElement>(id: string): T =>
    rootEl.querySelector(`#${id}`) as T;

  const state: AppState = {
    run: null,
    draft: null,
    targetId: null,
    compiled: null,
    searching: false,
  };
  let dragFrom = -1;

  function banner(err: unknown): void {
    const apiErr = err instanceof ApiError ? err : new ApiError(0, "unknown", String(err));
    el("banner").innerHTML = renderErrorBanner(apiErr.status, apiErr.message);
    if (apiErr.status === 0) {
      setTimeout(loadRuns, 3000); // retry banner path
    }
  }

  function drawDraft(): void {
    const draft = state.draft;
    if (!draft) return;
    const list = el<HTMLUListElement>("feature-list");
    list.innerHTML = draft.order
      .map((name, i) => {
        const sign = draft.signs[name];
        const signLabel = sign === 1 ? "+" : sign === -1 ? "−" : "·";
        return (
          `<li draggable="true" data-index="${i}" data-feature="${name}">` +
          `<span class="grip">⋮⋮</span> ${name}` +
          `<button class="sign" data-feature="${name}">${signLabel}</button></li>`
        );
      })
      .join("");
    list.querySelectorAll<HTMLLIElement>("li").forEach((li) => {
      li.addEventListener("dragstart", () => {
        dragFrom = Number(li.dataset.index);
      });
      li.addEventListener("dragover", (ev) => ev.preventDefault());
      li.addEventListener("drop", (ev) => {
        ev.preventDefault();
        state.draft = moveFeature(draft, dragFrom, Number(li.dataset.index));
        drawDraft();
      });
    });
    list.querySelectorAll<HTMLButtonElement>("button.sign").forEach((btn) => {
      btn.addEventListener("click", () => {
        state.draft = toggleSign(draft, btn.dataset.feature as string);
        drawDraft();
      });
    });
    el<HTMLButtonElement>("submit-target").disabled = !isValid(draft);
  }

  async function openRun(run: RunSummary): Promise<void> {
    state.run = run;
    state.draft = newDraft(run.dataset.feature_names);
    el("run-title").textContent = `Run ${run.run_id}`;
    el("run-panel").hidden = false;
    try {
      const ranges = await client.getAttributionRanges(run.run_id);
      el("ranges").innerHTML = renderAttributionRanges(ranges);
    } catch (err) {
      el("ranges").innerHTML =
        err instanceof ApiError ? renderErrorBanner(err.status, err.message) : "";
    }
    drawDraft();
  }

  async function loadRuns(): Promise<void> {
    try {
      const runs = await client.listRuns();
      el("banner").innerHTML = "";
      el("run-list").innerHTML = renderRunList(runs);
      el("run-list")
        .querySelectorAll<HTMLElement>(".run-card")
        .forEach((card) => {
          const run = runs.find((r) => r.run_id === card.dataset.runId);
          if (run) card.addEventListener("click", () => void openRun(run));
        });
    } catch (err) {
      banner(err);
    }
  }

  el("submit-target").addEventListener("click", async () => {
    if (!state.run || !state.draft) return;
    const inlineError = el("inline-error");
    inlineError.textContent = "";
    state.draft = { ...state.draft, text: el<HTMLTextAreaElement>("pref-text").value };
    try {
      const created = await client.createTarget(
        state.run.run_id,
        toPayload(state.draft, `ui-${Date.now().toString(36)}`),
      );
      state.targetId = created.target_id;
      state.compiled = created.compiled_target;
      el("compiled-echo").innerHTML =
        `<p>Compiled ranking: [${created.compiled_target.ranking.join(", ")}]</p>`;
      el("run-search").hidden = false;
    } catch (err) {
      if (err instanceof ApiError && err.status === 400) {
        inlineError.textContent = err.message; // inline at the editor
      } else {
        banner(err);
      }
    }
  });

  el("run-search").addEventListener("click", async () => {
    if (!state.run || !state.targetId || state.searching) return;
    const button = el<HTMLButtonElement>("run-search");
    const statusEl = el("job-status");
    state.searching = true;
    button.disabled = true; // one in-flight search per target, client side
    try {
      const { job_id } = await client.startSearch(state.run.run_id, state.targetId);
      const final = await pollJob(client, job_id, {
        onUpdate: (status) => {
          statusEl.innerHTML = renderJobStatus(status);
        },
      });
      if (final.status === "done") {
        const result = await client.getResult(state.run.run_id, state.targetId);
        el("comparison").innerHTML = renderComparison(result);
        el("refine").hidden = false;
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        statusEl.innerHTML = renderErrorBanner(
          409,
          "a search for this target is already running — wait for it to finish",
        );
      } else {
        banner(err);
      }
    } finally {
      state.searching = false;
      button.disabled = false;
    }
  });

  el("refine").addEventListener("click", () => {
    if (!state.run || !state.compiled) return;
    // Round-trip: the compiled target prefills the editor losslessly.
    state.draft = prefillFromCompiled(
      state.run.dataset.feature_names,
      state.compiled,
    );
    drawDraft();
    el("comparison").innerHTML = "";
  });

  void loadRuns();
}
