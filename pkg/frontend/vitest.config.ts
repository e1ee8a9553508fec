import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the round-trip suite spawns the reconstruction service
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
