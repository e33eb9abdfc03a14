import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { ApiClient } from "../src/api.js";

const fixturesDir = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export interface Recorded {
  status: number;
  body: unknown;
}

export function loadFixture(name: string): Recorded {
  return JSON.parse(readFileSync(join(fixturesDir, `${name}.json`), "utf8"));
}

/** Client whose fetch replays recorded responses keyed by "METHOD path". */
export function fixtureClient(routes: Record<string, Recorded | Recorded[]>): ApiClient {
  const remaining = new Map<string, Recorded[]>(
    Object.entries(routes).map(([k, v]) => [k, Array.isArray(v) ? [...v] : [v]]),
  );
  const fakeFetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const key = `${init?.method ?? "GET"} ${url}`;
    const queue = remaining.get(key);
    if (!queue || queue.length === 0) {
      throw new Error(`no fixture recorded for ${key}`);
    }
    const recorded = queue.length > 1 ? (queue.shift() as Recorded) : queue[0];
    return new Response(JSON.stringify(recorded.body), {
      status: recorded.status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return new ApiClient("", fakeFetch);
}
