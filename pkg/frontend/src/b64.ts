// Base64 to bytes in both the browser (atob) and node (Buffer), so the
// same modules run under vitest without a DOM.

declare const Buffer: { from(s: string, enc: string): Uint8Array } | undefined;

export function bytesFromBase64(b64: string): Uint8Array {
    if (typeof atob === "function") {
        const bin = atob(b64);
        const out = new Uint8Array(bin.length);
        for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
        return out;
    }
    return new Uint8Array(Buffer!.from(b64, "base64"));
}
