import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ReconnectingChannel, SocketLike } from "../src/channel.js";
import { ServerMessage } from "../src/protocol.js";
import { ConnectionStatus } from "../src/state.js";

class FakeSocket implements SocketLike {
    sent: string[] = [];
    closed = false;
    onopen: (() => void) | null = null;
    onmessage: ((ev: { data: unknown }) => void) | null = null;
    onclose: (() => void) | null = null;
    onerror: (() => void) | null = null;

    send(data: string): void {
        this.sent.push(data);
    }

    close(): void {
        this.closed = true;
    }

    open(): void {
        this.onopen?.();
    }

    push(doc: object): void {
        this.onmessage?.({ data: JSON.stringify(doc) });
    }

    drop(): void {
        this.onclose?.();
    }
}

describe("ReconnectingChannel", () => {
    let sockets: FakeSocket[];
    let messages: ServerMessage[];
    let statuses: ConnectionStatus[];
    let channel: ReconnectingChannel;

    beforeEach(() => {
        vi.useFakeTimers();
        sockets = [];
        messages = [];
        statuses = [];
        channel = new ReconnectingChannel("ws://test/ws", {
            factory: () => {
                const s = new FakeSocket();
                sockets.push(s);
                return s;
            },
            onMessage: (m) => messages.push(m),
            onStatus: (s) => statuses.push(s),
            baseDelayMs: 100,
            maxDelayMs: 1000,
        });
    });

    afterEach(() => {
        channel.close();
        vi.useRealTimers();
    });

    it("dispatches parsed messages and drops malformed ones", () => {
        channel.connect();
        sockets[0].open();
        sockets[0].push({ type: "heartbeat", t_ms: 1 });
        sockets[0].onmessage?.({ data: "{{{{" });
        sockets[0].push({ type: "who_knows" });
        expect(messages.map((m) => m.type)).toEqual(["heartbeat"]);
        expect(statuses).toEqual(["connecting", "open"]);
    });

    it("reconnects after a drop with exponential backoff", () => {
        channel.connect();
        sockets[0].open();
        sockets[0].drop();
        expect(statuses[statuses.length - 1]).toBe("closed");

        vi.advanceTimersByTime(99);
        expect(sockets.length).toBe(1);       // still waiting
        vi.advanceTimersByTime(2);
        expect(sockets.length).toBe(2);       // first retry after base delay

        sockets[1].drop();                     // no open, so backoff doubles
        vi.advanceTimersByTime(150);
        expect(sockets.length).toBe(2);
        vi.advanceTimersByTime(60);
        expect(sockets.length).toBe(3);

        sockets[2].open();                     // success resets the backoff
        expect(channel.delayMs()).toBe(100);
    });

    it("backoff is capped", () => {
        channel.connect();
        for (let i = 0; i < 10; i++) {
            sockets[sockets.length - 1].drop();
            vi.advanceTimersByTime(1001);
        }
        expect(channel.delayMs()).toBe(1000);
    });

    it("user close stops reconnecting", () => {
        channel.connect();
        sockets[0].open();
        channel.close();
        vi.advanceTimersByTime(10_000);
        expect(sockets.length).toBe(1);
        expect(sockets[0].closed).toBe(true);
    });

    it("send reports whether the channel was up", () => {
        expect(channel.send({ type: "reset_attempt" })).toBe(false);
        channel.connect();
        sockets[0].open();
        expect(channel.send({ type: "reset_attempt" })).toBe(true);
        expect(JSON.parse(sockets[0].sent[0])).toEqual({ type: "reset_attempt" });
    });
});
