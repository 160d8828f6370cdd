// Virtual probe input. Control changes can arrive per mousemove; the
// server wants at most 30 messages a second, so sends are rate-limited
// with the newest values winning: an immediate send when idle, one
// trailing send for everything that changed inside the window.

import { Contacts, virtualProbe } from "./protocol.js";

export interface ProbeControls {
    yaw: number;      // dial, degrees
    tilt: number;     // slider, degrees; rides the pitch field
    roll: number;
    contact: number | null;   // which pad button is held, if any
}

export function contactsFor(pad: number | null): Contacts {
    const c: Contacts = [false, false, false, false, false];
    if (pad !== null && pad >= 0 && pad < 5) c[pad] = true;
    return c;
}

export class ProbeSender {
    private lastSent = -Infinity;
    private pending: ProbeControls | null = null;
    private timer: ReturnType<typeof setTimeout> | null = null;

    constructor(private readonly send: (doc: object) => void,
                private readonly minIntervalMs: number = 34) {}

    update(controls: ProbeControls): void {
        const now = Date.now();
        if (now - this.lastSent >= this.minIntervalMs && this.timer === null) {
            this.emit(controls, now);
            return;
        }
        // inside the window: remember the latest, arm one trailing send
        this.pending = controls;
        if (this.timer === null) {
            const wait = Math.max(0, this.lastSent + this.minIntervalMs - now);
            this.timer = setTimeout(() => {
                this.timer = null;
                if (this.pending) {
                    const p = this.pending;
                    this.pending = null;
                    this.emit(p, Date.now());
                }
            }, wait);
        }
    }

    stop(): void {
        if (this.timer !== null) clearTimeout(this.timer);
        this.timer = null;
        this.pending = null;
    }

    private emit(c: ProbeControls, now: number): void {
        this.lastSent = now;
        this.send(virtualProbe(c.yaw, c.tilt, c.roll, contactsFor(c.contact)));
    }
}
