/** Poll a search job until it reaches a terminal state (1 s interval by
 * default; jobs at this scale finish in seconds, so polling keeps the
 * service stateless). */

import type { ApiClient, JobStatus } from "./api.js";

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
  onUpdate?: (status: JobStatus) => void;
}

const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export async function pollJob(
  client: ApiClient,
  jobId: string,
  options: PollOptions = {},
): Promise<JobStatus> {
  const interval = options.intervalMs ?? 1000;
  const timeout = options.timeoutMs ?? 10 * 60 * 1000;
  const deadline = Date.now() + timeout;
  for (;;) {
    const status = await client.getJob(jobId);
    options.onUpdate?.(status);
    if (status.status === "done" || status.status === "failed") {
      return status;
    }
    if (Date.now() >= deadline) {
      throw new Error(`job ${jobId} did not finish within ${timeout} ms`);
    }
    await sleep(interval);
  }
}
