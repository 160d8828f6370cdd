// Everything the page shows lives in one UiState, updated only from
// server messages and connection edges. No training logic here: stages,
// classes, and completion arrive computed from the server and are
// mirrored verbatim.

import { FeedbackEventDoc, ServerMessage, TargetDoc } from "./protocol.js";
import { bytesFromBase64 } from "./b64.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

const TICKER_MAX = 6;

export interface UiState {
    connection: ConnectionStatus;
    target: TargetDoc | null;
    bar: number;                 // server stage_max, 0..3
    stage: number;               // live stage
    tiltClass: string | null;
    completed: boolean;
    seq: number;
    ticker: FeedbackEventDoc[];  // newest last
    toast: string | null;        // one-shot banner for VIEW_ACQUIRED
    frame: { key: string; index: number } | null;
    slice: { width: number; height: number; pixels: Uint8Array } | null;
    calibration: { phase: string; secondsRemaining: number; detail?: string } | null;
    quiz: { itemId: string; correct: boolean; explanation: string } | null;
    controlsDisabled: boolean;   // set when the server owns the probe
    lastError: string | null;
}

export function initialState(): UiState {
    return {
        connection: "connecting",
        target: null,
        bar: 0,
        stage: 0,
        tiltClass: null,
        completed: false,
        seq: -1,
        ticker: [],
        toast: null,
        frame: null,
        slice: null,
        calibration: null,
        quiz: null,
        controlsDisabled: false,
        lastError: null,
    };
}

/** Pure transition: one server message in, the next UiState out. */
export function applyMessage(s: UiState, m: ServerMessage): UiState {
    switch (m.type) {
        case "state": {
            const next: UiState = {
                ...s,
                target: m.target,
                bar: m.stage_max,
                stage: m.stage,
                tiltClass: m.tilt_class,
                completed: m.completed,
                seq: m.seq,
            };
            if (m.feedback_event) {
                next.ticker = [...s.ticker, m.feedback_event].slice(-TICKER_MAX);
                if (m.feedback_event.code === "VIEW_ACQUIRED") {
                    next.toast = "VIEW_ACQUIRED";
                }
            }
            return next;
        }
        case "frame_ref":
            return { ...s, frame: { key: m.asset_key, index: m.frame_index }, slice: null };
        case "slice_frame":
            return {
                ...s,
                slice: { width: m.width, height: m.height, pixels: bytesFromBase64(m.pixels) },
                frame: null,
            };
        case "calibration":
            return {
                ...s,
                calibration: {
                    phase: m.phase,
                    secondsRemaining: m.seconds_remaining,
                    detail: m.detail,
                },
            };
        case "quiz_result":
            return { ...s, quiz: { itemId: m.item_id, correct: m.correct, explanation: m.explanation } };
        case "error":
            if (m.code === "SourceConflict") {
                return { ...s, controlsDisabled: true, lastError: m.detail };
            }
            return { ...s, lastError: m.detail };
        case "heartbeat":
            return s;
    }
}

/** Connection edges. A reconnect starts a fresh mirror; the snapshot the
 *  server sends on attach repopulates everything that matters. */
export function connectionChanged(s: UiState, status: ConnectionStatus): UiState {
    if (status === "open") {
        return { ...initialState(), connection: "open" };
    }
    return { ...s, connection: status };
}

export function clearToast(s: UiState): UiState {
    return s.toast === null ? s : { ...s, toast: null };
}
