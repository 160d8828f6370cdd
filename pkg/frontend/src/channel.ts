// Reconnecting message channel. One WebSocket at a time; on drop it backs
// off exponentially and tries again until close() is called. The socket is
// injected as a factory so tests can run without a network.

import { ServerMessage, parseServerMessage } from "./protocol.js";
import { ConnectionStatus } from "./state.js";

export interface SocketLike {
    send(data: string): void;
    close(): void;
    onopen: (() => void) | null;
    onmessage: ((ev: { data: unknown }) => void) | null;
    onclose: (() => void) | null;
    onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ChannelOptions {
    factory?: SocketFactory;
    onMessage: (m: ServerMessage) => void;
    onStatus?: (s: ConnectionStatus) => void;
    baseDelayMs?: number;
    maxDelayMs?: number;
}

const defaultFactory: SocketFactory = (url) =>
    new WebSocket(url) as unknown as SocketLike;

export class ReconnectingChannel {
    private sock: SocketLike | null = null;
    private attempts = 0;
    private timer: ReturnType<typeof setTimeout> | null = null;
    private closedByUser = false;
    private readonly factory: SocketFactory;
    private readonly baseDelayMs: number;
    private readonly maxDelayMs: number;

    constructor(private readonly url: string,
                private readonly opts: ChannelOptions) {
        this.factory = opts.factory ?? defaultFactory;
        this.baseDelayMs = opts.baseDelayMs ?? 250;
        this.maxDelayMs = opts.maxDelayMs ?? 8000;
    }

    connect(): void {
        if (this.closedByUser) return;
        this.status("connecting");
        const sock = this.factory(this.url);
        this.sock = sock;
        sock.onopen = () => {
            this.attempts = 0;
            this.status("open");
        };
        sock.onmessage = (ev) => {
            if (typeof ev.data !== "string") return;
            const msg = parseServerMessage(ev.data);
            if (msg) this.opts.onMessage(msg);
        };
        sock.onclose = () => this.dropped(sock);
        sock.onerror = () => this.dropped(sock);
    }

    /** Send one document; false if the channel is not up right now. */
    send(doc: object): boolean {
        if (!this.sock) return false;
        try {
            this.sock.send(JSON.stringify(doc));
            return true;
        } catch {
            return false;
        }
    }

    close(): void {
        this.closedByUser = true;
        if (this.timer !== null) clearTimeout(this.timer);
        this.timer = null;
        this.sock?.close();
        this.sock = null;
    }

    /** Next reconnect delay; exposed for tests. */
    delayMs(): number {
        return Math.min(this.maxDelayMs,
                        this.baseDelayMs * Math.pow(2, this.attempts));
    }

    private dropped(sock: SocketLike): void {
        if (sock !== this.sock) return;  // stale callback from a replaced socket
        this.sock = null;
        this.status("closed");
        if (this.closedByUser) return;
        const delay = this.delayMs();
        this.attempts += 1;
        this.timer = setTimeout(() => this.connect(), delay);
    }

    private status(s: ConnectionStatus): void {
        this.opts.onStatus?.(s);
    }
}
