// Canvas painting for grayscale rasters, whether a preloaded asset frame
// or a live slice off the wire.

export class Viewport {
    private readonly ctx: CanvasRenderingContext2D;
    private image: ImageData | null = null;

    constructor(private readonly canvas: HTMLCanvasElement) {
        const ctx = canvas.getContext("2d");
        if (!ctx) throw new Error("canvas 2d context unavailable");
        this.ctx = ctx;
        this.ctx.imageSmoothingEnabled = false;
    }

    show(gray: Uint8Array, width: number, height: number): void {
        if (this.canvas.width !== width || this.canvas.height !== height) {
            this.canvas.width = width;
            this.canvas.height = height;
            this.image = null;
        }
        if (!this.image) this.image = this.ctx.createImageData(width, height);
        const rgba = this.image.data;
        for (let i = 0; i < gray.length; i++) {
            const v = gray[i];
            const o = i * 4;
            rgba[o] = v;
            rgba[o + 1] = v;
            rgba[o + 2] = v;
            rgba[o + 3] = 255;
        }
        this.ctx.putImageData(this.image, 0, 0);
    }

    blank(): void {
        this.ctx.fillStyle = "#000";
        this.ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    }
}
