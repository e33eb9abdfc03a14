/** Pure HTML renderers. Every number shown is `String()` of a value taken
 * verbatim from a service response — the UI performs no metric math and no
 * rounding, so fixture diffs against the raw JSON are exact. */

import type {
  AttributionRange,
  JobStatus,
  RunSummary,
  SearchResult,
} from "./api.js";

export const METRICS = ["fa", "ra", "sa", "sra", "rc", "pra", "pgi", "pgu"] as const;

const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");

export function renderRunList(runs: RunSummary[]): string {
  if (runs.length === 0) {
    return '<p class="empty">No runs on this server yet.</p>';
  }
  return runs
    .map((run) => {
      const stages = Object.entries(run.stages)
        .filter(([, done]) => done)
        .map(([name]) => name)
        .join(", ");
      return (
        `<div class="run-card" data-run-id="${esc(run.run_id)}">` +
        `<h3>${esc(run.run_id)}</h3>` +
        `<p>${run.dataset.n} rows × ${run.dataset.p} features` +
        ` (${esc(run.dataset.kind)})</p>` +
        `<p class="stages">stages: ${esc(stages)}</p>` +
        `</div>`
      );
    })
    .join("\n");
}

/** Min/max bars scaled against the largest |max| purely for layout; the
 * displayed numbers are the raw response values. */
export function renderAttributionRanges(ranges: AttributionRange[]): string {
  const top = Math.max(...ranges.map((r) => Math.abs(r.max)), 1e-12);
  const rows = ranges
    .map((r) => {
      const left = Math.round((Math.abs(r.min) / top) * 100);
      const right = Math.round((Math.abs(r.max) / top) * 100);
      return (
        `<tr><td>${esc(r.feature)}</td>` +
        `<td class="num">${String(r.min)}</td>` +
        `<td class="num">${String(r.max)}</td>` +
        `<td><div class="bar" style="margin-left:${left}%;width:${Math.max(
          right - left,
          1,
        )}%"></div></td></tr>`
      );
    })
    .join("");
  return (
    `<table class="ranges"><thead><tr><th>feature</th><th>min</th>` +
    `<th>max</th><th>range</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderJobStatus(status: JobStatus): string {
  const pct = Math.round(status.progress * 100);
  if (status.status === "failed") {
    return (
      `<div class="job failed">search failed` +
      `<pre class="trace">${esc(status.error ?? "no trace available")}</pre></div>`
    );
  }
  return `<div class="job ${status.status}">search ${status.status} (${pct}%)</div>`;
}

/** Side-by-side reference vs SAEM metric panels across the returned k grid. */
export function renderComparison(result: SearchResult): string {
  const ks = Object.keys(result.agreement);
  const header =
    `<tr><th>metric</th>` +
    ks.map((k) => `<th colspan="2">k=${esc(k)}</th>`).join("") +
    `</tr><tr><th></th>` +
    ks.map(() => `<th>reference</th><th>SAEM</th>`).join("") +
    `</tr>`;
  const rows = METRICS.map((metric) => {
    const cells = ks
      .map((k) => {
        const block = result.agreement[k];
        return (
          `<td class="num">${String(block.reference[metric])}</td>` +
          `<td class="num">${String(block.saem[metric])}</td>`
        );
      })
      .join("");
    return `<tr><td>${metric.toUpperCase()}</td>${cells}</tr>`;
  }).join("");
  return (
    `<div class="comparison">` +
    `<p>Spearman vs target: reference ` +
    `<b>${String(result.reference_spearman)}</b> → SAEM ` +
    `<b>${String(result.spearman_vs_target)}</b>` +
    ` · in Rashomon bound: ${result.loss_in_bound}</p>` +
    `<p>achieved ranking: [${result.achieved_ranking.join(", ")}]</p>` +
    `<table class="metrics"><thead>${header}</thead><tbody>${rows}</tbody></table>` +
    `</div>`
  );
}

export function renderErrorBanner(status: number, message: string): string {
  const label = status === 0 ? "service unreachable — retrying" : `HTTP ${status}`;
  return `<div class="banner error">${label}: ${esc(message)}</div>`;
}
