/** Node-side plumbing for the console tests: the instrumented-page
 * dump used by the XPath parity test, and the live backend harness the
 * round-trip test replays against. */

import { execFileSync, spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { dirname, join, resolve } from "node:path";
import { createInterface } from "node:readline";
import { fileURLToPath } from "node:url";

export const frontendDir = resolve(dirname(fileURLToPath(import.meta.url)), "..");

export interface InstrumentedPage {
  family: string;
  key: string;
  html: string;
}

export function dumpInstrumentedPages(): InstrumentedPage[] {
  const stdout = execFileSync(
    "python3",
    [join(frontendDir, "test", "dump_instrumented.py")],
    { encoding: "utf-8", maxBuffer: 256 * 1024 * 1024 },
  );
  return JSON.parse(stdout) as InstrumentedPage[];
}

export type ScriptOp =
  | { op: "click"; page_id: string; gt: string; role: string }
  | {
      op: "snippets";
      page_id: string;
      role: string;
      snippets: string[];
      post_count: number;
    }
  | {
      op: "decision";
      accept: boolean;
      conflict: boolean;
      technique?: string;
      selector?: string;
      count?: number;
    };

export interface HarnessInfo {
  family: string;
  base_url: string;
  script: ScriptOp[];
}

export interface HarnessFinale {
  blueprint_written: boolean;
  blueprint_match: boolean;
}

function raceTimeout<T>(work: Promise<T>, ms: number, what: string): Promise<T> {
  return Promise.race([
    work,
    new Promise<never>((_, reject) => {
      const timer = setTimeout(() => reject(new Error(`timed out waiting for ${what}`)), ms);
      timer.unref();
    }),
  ]);
}

/** A recorded reference session plus a live trainer to replay it against. */
export class Harness {
  private constructor(
    readonly info: HarnessInfo,
    private readonly proc: ChildProcessWithoutNullStreams,
    private readonly lines: AsyncIterator<string>,
    private readonly stderr: () => string,
  ) {}

  static async start(family: string): Promise<Harness> {
    const proc = spawn(
      "python3",
      [join(frontendDir, "test", "backend_harness.py"), family, join(frontendDir, "dist")],
      { stdio: ["pipe", "pipe", "pipe"] },
    );
    let stderr = "";
    proc.stderr.setEncoding("utf-8");
    proc.stderr.on("data", (chunk: string) => {
      stderr += chunk;
    });
    const lines = createInterface({ input: proc.stdout })[Symbol.asyncIterator]();
    const first = await raceTimeout(lines.next(), 90_000, `the ${family} harness to start`).catch(
      (err: Error) => {
        proc.kill("SIGKILL");
        throw new Error(`${err.message}\n${stderr}`);
      },
    );
    if (first.done) {
      throw new Error(`harness exited before serving\n${stderr}`);
    }
    return new Harness(
      JSON.parse(first.value) as HarnessInfo,
      proc,
      lines,
      () => stderr,
    );
  }

  /** Close stdin; the harness answers with the blueprint comparison. */
  async finish(): Promise<HarnessFinale> {
    this.proc.stdin.end();
    const line = await raceTimeout(this.lines.next(), 30_000, "the harness finale").catch(
      (err: Error) => {
        throw new Error(`${err.message}\n${this.stderr()}`);
      },
    );
    if (line.done) {
      throw new Error(`harness closed without a finale\n${this.stderr()}`);
    }
    return JSON.parse(line.value) as HarnessFinale;
  }

  kill(): void {
    this.proc.kill("SIGKILL");
  }
}
