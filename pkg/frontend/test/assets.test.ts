import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { loadLibrary } from "../src/assets.js";

const fixture = JSON.parse(readFileSync(
    new URL("./fixtures/small_anim.json", import.meta.url), "utf8"));

function gifBytes(): Uint8Array {
    const hex: string = fixture.hex;
    const out = new Uint8Array(hex.length / 2);
    for (let i = 0; i < out.length; i++) {
        out[i] = parseInt(hex.slice(2 * i, 2 * i + 2), 16);
    }
    return out;
}

const manifest = {
    entries: {
        "Apical/NormalView": { gif: "/assets/Apical/NormalView.gif", frame_period_ms: 50 },
        "Apical/TiltView": { gif: "/assets/Apical/TiltView.gif", frame_period_ms: 50 },
    },
    sensors: { Apical: 0 },
    targets: [{ view: "Apical", variant: "Tilt" }],
    stage_max: 3,
};

function fakeFetch(requests: string[]) {
    return async (url: string) => {
        requests.push(url);
        if (url.endsWith("/manifest.json")) {
            return {
                ok: true, status: 200,
                json: async () => manifest,
                arrayBuffer: async () => new ArrayBuffer(0),
            };
        }
        if (url.includes("/assets/")) {
            const bytes = gifBytes();
            return {
                ok: true, status: 200,
                json: async () => ({}),
                arrayBuffer: async () =>
                    bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength),
            };
        }
        return {
            ok: false, status: 404,
            json: async () => ({}),
            arrayBuffer: async () => new ArrayBuffer(0),
        };
    };
}

describe("loadLibrary", () => {
    it("fetches the manifest then decodes every asset once", async () => {
        const requests: string[] = [];
        const lib = await loadLibrary("", fakeFetch(requests));
        expect(requests[0]).toBe("/manifest.json");
        expect(requests.length).toBe(3);   // manifest + two gifs, nothing more
        expect(lib.assets.size).toBe(2);
        const asset = lib.assets.get("Apical/TiltView")!;
        expect(asset.frames.length).toBe(fixture.frames.length);
        expect(asset.width).toBe(fixture.width);
        expect(asset.periodMs).toBe(50);
        expect(Array.from(asset.frames[0])).toEqual(fixture.frames[0]);
    });

    it("surfaces a failed asset fetch", async () => {
        const broken = async (url: string) => {
            if (url.endsWith("/manifest.json")) {
                return {
                    ok: true, status: 200,
                    json: async () => manifest,
                    arrayBuffer: async () => new ArrayBuffer(0),
                };
            }
            return {
                ok: false, status: 500,
                json: async () => ({}),
                arrayBuffer: async () => new ArrayBuffer(0),
            };
        };
        await expect(loadLibrary("", broken)).rejects.toThrow(/fetch failed/);
    });
});
