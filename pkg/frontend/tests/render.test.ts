import { describe, expect, it } from "vitest";

import type {
  AttributionRange,
  JobStatus,
  RunSummary,
  SearchResult,
} from "../src/api.js";
import {
  METRICS,
  renderAttributionRanges,
  renderComparison,
  renderErrorBanner,
  renderJobStatus,
  renderRunList,
} from "../src/render.js";
import { loadFixture } from "./helpers.js";

describe("run browser rendering", () => {
  it("renders one card per run with feature count", () => {
    const runs = (loadFixture("runs").body as { runs: RunSummary[] }).runs;
    const html = renderRunList(runs);
    expect(html.match(/run-card/g)).toHaveLength(1);
    expect(html).toContain("1000 rows × 5 features");
  });

  it("renders an empty state for an empty server", () => {
    expect(renderRunList([])).toContain("No runs on this server yet");
  });

  it("renders attribution min/max exactly as returned", () => {
    const ranges = (loadFixture("attribution_ranges").body as {
      ranges: AttributionRange[];
    }).ranges;
    const html = renderAttributionRanges(ranges);
    for (const r of ranges) {
      expect(html).toContain(`>${String(r.min)}<`);
      expect(html).toContain(`>${String(r.max)}<`);
    }
  });
});

describe("comparison panel (fixture-diffed)", () => {
  const result = loadFixture("result").body as SearchResult;
  const html = renderComparison(result);

  it("renders every metric value verbatim for every k, both panels", () => {
    for (const k of Object.keys(result.agreement)) {
      for (const metric of METRICS) {
        expect(html).toContain(String(result.agreement[k].reference[metric]));
        expect(html).toContain(String(result.agreement[k].saem[metric]));
      }
    }
  });

  it("renders the full k grid and both column groups", () => {
    for (const k of ["0.1", "0.25", "0.5", "0.75", "1.0"]) {
      expect(html).toContain(`k=${k}`);
    }
    expect(html.match(/<th>reference<\/th><th>SAEM<\/th>/g)).toHaveLength(5);
  });

  it("renders the spearman pair and the achieved ranking verbatim", () => {
    expect(html).toContain(String(result.reference_spearman));
    expect(html).toContain(String(result.spearman_vs_target));
    expect(html).toContain(`[${result.achieved_ranking.join(", ")}]`);
  });

  it("contains no computed numbers: removing response values leaves no digits in metric cells", () => {
    // Every numeric cell must be a verbatim response value.
    const cells = [...html.matchAll(/<td class="num">([^<]*)<\/td>/g)].map((m) => m[1]);
    const allowed = new Set<string>();
    for (const k of Object.keys(result.agreement)) {
      for (const metric of METRICS) {
        allowed.add(String(result.agreement[k].reference[metric]));
        allowed.add(String(result.agreement[k].saem[metric]));
      }
    }
    for (const cell of cells) expect(allowed.has(cell)).toBe(true);
  });
});

describe("status and error rendering", () => {
  it("renders job progress", () => {
    const status = loadFixture("job_done").body as JobStatus;
    expect(renderJobStatus(status)).toContain("search done (100%)");
  });

  it("shows a trace excerpt on failure", () => {
    const failed: JobStatus = {
      job_id: "x", run_id: "r", target_id: "t",
      status: "failed", progress: 0.1,
      error: "Traceback (most recent call last): boom",
    };
    const html = renderJobStatus(failed);
    expect(html).toContain("search failed");
    expect(html).toContain("Traceback");
  });

  it("renders a banner with the HTTP status code", () => {
    expect(renderErrorBanner(500, "internal")).toContain("HTTP 500");
    expect(renderErrorBanner(0, "down")).toContain("service unreachable");
  });
});
