import { defineConfig } from "vitest/config";

export default defineConfig({
  base: "/ui/",
  build: { outDir: "dist" },
  server: {
    proxy: {
      "/api": "http://127.0.0.1:8080",
      "/healthz": "http://127.0.0.1:8080",
    },
  },
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
  },
});
