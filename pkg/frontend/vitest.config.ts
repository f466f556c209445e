import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // the e2e file boots a real store and server; everything else is fast
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
