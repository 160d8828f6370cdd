// Decoder for the narrow GIF profile the service emits: GIF89a, one
// global 256-entry palette, full-frame images, no interlace, no local
// tables. Narrow on purpose: assets are animated by frame index, so the
// client needs every frame as a flat grayscale raster, and the <img>
// tag cannot seek.

export class GifFormatError extends Error {}

export interface DecodedGif {
    width: number;
    height: number;
    delayMs: number;
    frames: Uint8Array[];   // grayscale, row-major, one byte per pixel
}

class Reader {
    pos = 0;
    constructor(private readonly b: Uint8Array) {}

    u8(): number {
        if (this.pos >= this.b.length) throw new GifFormatError("truncated stream");
        return this.b[this.pos++];
    }

    u16(): number {
        return this.u8() | (this.u8() << 8);
    }

    take(n: number): Uint8Array {
        if (this.pos + n > this.b.length) throw new GifFormatError("truncated stream");
        const out = this.b.subarray(this.pos, this.pos + n);
        this.pos += n;
        return out;
    }

    subBlocks(): Uint8Array {
        const parts: Uint8Array[] = [];
        let total = 0;
        for (;;) {
            const n = this.u8();
            if (n === 0) break;
            parts.push(this.take(n));
            total += n;
        }
        const out = new Uint8Array(total);
        let at = 0;
        for (const p of parts) {
            out.set(p, at);
            at += p.length;
        }
        return out;
    }

    skipSubBlocks(): void {
        for (;;) {
            const n = this.u8();
            if (n === 0) break;
            this.take(n);
        }
    }
}

function lzwDecode(data: Uint8Array, minCodeSize: number,
                   expected: number): Uint8Array {
    const clear = 1 << minCodeSize;
    const eoi = clear + 1;
    const prefix = new Int32Array(4096);
    const suffix = new Uint8Array(4096);
    const out = new Uint8Array(expected);
    let outAt = 0;

    let codeSize = minCodeSize + 1;
    let next = eoi + 1;
    let prev = -1;

    let acc = 0;
    let bits = 0;
    let at = 0;

    const firstOf = (code: number): number => {
        while (code >= clear) code = prefix[code];
        return code;
    };
    const emit = (code: number): void => {
        const stack: number[] = [];
        let c = code;
        while (c >= clear) {
            stack.push(suffix[c]);
            c = prefix[c];
        }
        stack.push(c);
        for (let i = stack.length - 1; i >= 0; i--) {
            if (outAt >= expected) throw new GifFormatError("pixel data overrun");
            out[outAt++] = stack[i];
        }
    };

    for (;;) {
        while (bits < codeSize) {
            if (at >= data.length) throw new GifFormatError("truncated pixel data");
            acc |= data[at++] << bits;
            bits += 8;
        }
        const code = acc & ((1 << codeSize) - 1);
        acc >>= codeSize;
        bits -= codeSize;

        if (code === clear) {
            codeSize = minCodeSize + 1;
            next = eoi + 1;
            prev = -1;
            continue;
        }
        if (code === eoi) break;
        if (code < next) {
            emit(code);
            if (prev >= 0 && next < 4096) {
                prefix[next] = prev;
                suffix[next] = firstOf(code);
                next++;
            }
        } else if (code === next && prev >= 0 && next < 4096) {
            prefix[next] = prev;
            suffix[next] = firstOf(prev);
            next++;
            emit(code);
        } else {
            throw new GifFormatError("corrupt LZW code");
        }
        prev = code;
        if (next === 1 << codeSize && codeSize < 12) codeSize++;
    }
    if (outAt !== expected) throw new GifFormatError("short pixel data");
    return out;
}

export function decodeGif(bytes: Uint8Array): DecodedGif {
    const r = new Reader(bytes);
    const magic = r.take(6);
    const magicStr = String.fromCharCode(...magic);
    if (magicStr !== "GIF89a") {
        throw new GifFormatError(`bad magic ${JSON.stringify(magicStr)}`);
    }
    const width = r.u16();
    const height = r.u16();
    const flags = r.u8();
    r.u8();  // background index
    r.u8();  // aspect
    if ((flags & 0x80) === 0) {
        throw new GifFormatError("missing global color table");
    }
    const tableSize = 2 << (flags & 0x07);
    const palette = r.take(3 * tableSize);

    let delayCs = 0;
    const frames: Uint8Array[] = [];

    for (;;) {
        const block = r.u8();
        if (block === 0x3b) break;
        if (block === 0x21) {
            const label = r.u8();
            if (label === 0xf9) {
                const body = r.subBlocks();
                if (body.length >= 3) delayCs = body[1] | (body[2] << 8);
            } else {
                // application, comment, anything else: irrelevant, skip
                r.skipSubBlocks();
            }
            continue;
        }
        if (block !== 0x2c) {
            throw new GifFormatError(`unexpected block 0x${block.toString(16)}`);
        }
        const left = r.u16();
        const top = r.u16();
        const w = r.u16();
        const h = r.u16();
        const iflags = r.u8();
        if (left !== 0 || top !== 0 || w !== width || h !== height) {
            throw new GifFormatError("partial frames not supported");
        }
        if (iflags & 0x80) throw new GifFormatError("local color table not supported");
        if (iflags & 0x40) throw new GifFormatError("interlace not supported");
        const mcs = r.u8();
        if (mcs < 2 || mcs > 8) throw new GifFormatError(`bad code size ${mcs}`);
        const indices = lzwDecode(r.subBlocks(), mcs, w * h);
        // palette red channel carries the gray level
        const gray = new Uint8Array(indices.length);
        for (let i = 0; i < indices.length; i++) {
            gray[i] = palette[3 * indices[i]];
        }
        frames.push(gray);
    }
    if (frames.length === 0) throw new GifFormatError("no frames");
    return { width, height, delayMs: delayCs * 10, frames };
}
