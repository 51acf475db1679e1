import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // The live-service suite spawns the extraction server and waits for
    // its health endpoint, so hooks get a generous budget.
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
