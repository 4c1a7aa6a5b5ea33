import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 180_000,
    hookTimeout: 180_000,
    // the bindings share one worker process; keep calls in one runner
    pool: "forks",
    poolOptions: { forks: { singleFork: true } },
  },
});
