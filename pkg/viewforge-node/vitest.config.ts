import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // parity tests shell out to the engine; generation dominates the clock
    testTimeout: 180_000,
    hookTimeout: 60_000,
  },
});
