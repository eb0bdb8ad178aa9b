import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 1_200_000,
    // the training loops are CPU-bound; parallel files would fight for cores
    fileParallelism: false,
  },
});
