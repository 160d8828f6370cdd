// Asset preloading: fetch the manifest once at connect, pull every GIF,
// decode client-side. After this, frame_ref messages are just pointers
// and playback costs no bandwidth.

import { DecodedGif, decodeGif } from "./gif.js";

export interface ManifestEntryDoc {
    gif: string;
    frame_period_ms: number;
}

export interface ManifestDoc {
    entries: Record<string, ManifestEntryDoc>;
    sensors: Record<string, number>;
    targets: { view: string; variant: string }[];
    stage_max: number;
}

export interface LoadedAsset extends DecodedGif {
    periodMs: number;
}

export interface AssetLibrary {
    manifest: ManifestDoc;
    assets: Map<string, LoadedAsset>;   // keyed "View/Class"
}

type FetchLike = (url: string) => Promise<{
    ok: boolean;
    status: number;
    json(): Promise<unknown>;
    arrayBuffer(): Promise<ArrayBuffer>;
}>;

export async function loadLibrary(baseUrl: string,
                                  fetchFn: FetchLike = fetch): Promise<AssetLibrary> {
    const res = await fetchFn(`${baseUrl}/manifest.json`);
    if (!res.ok) throw new Error(`manifest fetch failed: ${res.status}`);
    const manifest = await res.json() as ManifestDoc;

    const assets = new Map<string, LoadedAsset>();
    await Promise.all(Object.entries(manifest.entries).map(async ([key, entry]) => {
        const gifRes = await fetchFn(`${baseUrl}${entry.gif}`);
        if (!gifRes.ok) throw new Error(`asset ${key} fetch failed: ${gifRes.status}`);
        const decoded = decodeGif(new Uint8Array(await gifRes.arrayBuffer()));
        assets.set(key, { ...decoded, periodMs: entry.frame_period_ms });
    }));
    return { manifest, assets };
}
