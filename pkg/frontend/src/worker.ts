/**
 * Persistent out-of-process worker speaking the toolkit CLI's line-delimited
 * JSON request protocol (`mht rpc`). Requests are answered strictly in order,
 * so a FIFO of pending promises is enough to pair them up.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import { createInterface, type Interface } from "node:readline";
import type { Readable, Writable } from "node:stream";

type Child = ChildProcessByStdio<Writable, Readable, null>;

export interface RpcOk {
  ok: true;
  result: unknown;
}

export interface RpcErr {
  ok: false;
  code: number;
  message: string;
}

export type RpcResponse = RpcOk | RpcErr;

interface Pending {
  resolve: (value: RpcResponse) => void;
}

const WORKER_SPAWN_FAILED = 2;

export class RpcWorker {
  private child: Child | null = null;
  private reader: Interface | null = null;
  private pending: Pending[] = [];
  private readonly command: string[];

  constructor(command?: string[]) {
    // MHT_BIN overrides the binary, e.g. "python3 -m mht.cli".
    const bin = command ?? (process.env.MHT_BIN ?? "mht").split(" ");
    this.command = [...bin, "rpc"];
  }

  private failAllPending(message: string): void {
    const waiting = this.pending;
    this.pending = [];
    for (const p of waiting) {
      p.resolve({ ok: false, code: WORKER_SPAWN_FAILED, message });
    }
  }

  private ensureChild(): Child {
    if (this.child) {
      return this.child;
    }
    const [cmd, ...args] = this.command;
    const child = spawn(cmd, args, { stdio: ["pipe", "pipe", "inherit"] });
    child.on("error", (err) => {
      this.child = null;
      this.failAllPending(`worker failed to start: ${err.message}`);
    });
    child.on("exit", (code) => {
      this.child = null;
      this.reader = null;
      this.failAllPending(`worker exited with code ${code}`);
    });
    const reader = createInterface({ input: child.stdout });
    reader.on("line", (line) => {
      const next = this.pending.shift();
      if (!next) {
        return;
      }
      try {
        next.resolve(JSON.parse(line) as RpcResponse);
      } catch (err) {
        next.resolve({
          ok: false,
          code: WORKER_SPAWN_FAILED,
          message: `unparseable worker response: ${String(err)}`,
        });
      }
    });
    this.child = child;
    this.reader = reader;
    return child;
  }

  request(payload: Record<string, unknown>): Promise<RpcResponse> {
    return new Promise((resolve) => {
      let child: Child;
      try {
        child = this.ensureChild();
      } catch (err) {
        resolve({
          ok: false,
          code: WORKER_SPAWN_FAILED,
          message: `worker failed to start: ${String(err)}`,
        });
        return;
      }
      this.pending.push({ resolve });
      child.stdin.write(JSON.stringify(payload) + "\n");
    });
  }

  shutdown(): void {
    if (this.child) {
      this.child.stdin.end();
      this.child.kill();
      this.child = null;
      this.reader?.close();
      this.reader = null;
      this.failAllPending("worker shut down");
    }
  }
}
