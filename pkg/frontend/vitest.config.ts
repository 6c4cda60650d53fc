import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node", // DOM tests opt into jsdom via @vitest-environment
  },
});
