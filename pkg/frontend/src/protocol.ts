// Wire schema for the training service: newline-JSON over TCP or the same
// documents as WebSocket text frames. Field names match the server exactly.

export interface TargetDoc {
    view: string;
    variant: string;
}

export interface FeedbackEventDoc {
    t_ms: number;
    code: string;
}

export interface StateMsg {
    type: "state";
    seq: number;
    stage: number;        // live stage, may drop
    stage_max: number;    // ratchet; this is what the bar shows
    tilt_class: string | null;
    completed: boolean;
    target: TargetDoc;
    feedback_event?: FeedbackEventDoc;
}

export interface FrameRefMsg {
    type: "frame_ref";
    asset_key: string;    // "View/Class", resolves against preloaded assets
    frame_index: number;
}

export interface SliceFrameMsg {
    type: "slice_frame";
    width: number;
    height: number;
    pixels: string;       // base64 grayscale raster, row-major
}

export interface CalibrationMsg {
    type: "calibration";
    phase: "collecting" | "applied" | "failed";
    seconds_remaining: number;
    detail?: string;
}

export interface QuizResultMsg {
    type: "quiz_result";
    item_id: string;
    correct: boolean;
    explanation: string;
}

export interface ErrorMsg {
    type: "error";
    code: string;
    detail: string;
}

export interface HeartbeatMsg {
    type: "heartbeat";
    t_ms: number;
}

export type ServerMessage =
    | StateMsg
    | FrameRefMsg
    | SliceFrameMsg
    | CalibrationMsg
    | QuizResultMsg
    | ErrorMsg
    | HeartbeatMsg;

function isNum(v: unknown): v is number {
    return typeof v === "number" && Number.isFinite(v);
}

function isStr(v: unknown): v is string {
    return typeof v === "string";
}

function isTarget(v: unknown): v is TargetDoc {
    const t = v as TargetDoc;
    return !!v && typeof v === "object" && isStr(t.view) && isStr(t.variant);
}

function isFeedback(v: unknown): v is FeedbackEventDoc {
    const f = v as FeedbackEventDoc;
    return !!v && typeof v === "object" && isNum(f.t_ms) && isStr(f.code);
}

/** Parse one server document. Returns null for anything malformed or
 *  unknown, so a bad frame can never take the client down. */
export function parseServerMessage(raw: string): ServerMessage | null {
    let doc: unknown;
    try {
        doc = JSON.parse(raw);
    } catch {
        return null;
    }
    if (!doc || typeof doc !== "object" || Array.isArray(doc)) return null;
    const m = doc as Record<string, unknown>;
    switch (m.type) {
        case "state": {
            const ok = isNum(m.seq) && isNum(m.stage) && isNum(m.stage_max)
                && (m.tilt_class === null || isStr(m.tilt_class))
                && typeof m.completed === "boolean" && isTarget(m.target)
                && (m.feedback_event === undefined || isFeedback(m.feedback_event));
            return ok ? (doc as StateMsg) : null;
        }
        case "frame_ref":
            return isStr(m.asset_key) && isNum(m.frame_index)
                ? (doc as FrameRefMsg) : null;
        case "slice_frame":
            return isNum(m.width) && isNum(m.height) && isStr(m.pixels)
                ? (doc as SliceFrameMsg) : null;
        case "calibration":
            return (m.phase === "collecting" || m.phase === "applied"
                    || m.phase === "failed") && isNum(m.seconds_remaining)
                && (m.detail === undefined || isStr(m.detail))
                ? (doc as CalibrationMsg) : null;
        case "quiz_result":
            return isStr(m.item_id) && typeof m.correct === "boolean"
                && isStr(m.explanation) ? (doc as QuizResultMsg) : null;
        case "error":
            return isStr(m.code) && isStr(m.detail) ? (doc as ErrorMsg) : null;
        case "heartbeat":
            return isNum(m.t_ms) ? (doc as HeartbeatMsg) : null;
        default:
            return null;
    }
}

export type Contacts = [boolean, boolean, boolean, boolean, boolean];

// Client-to-server builders. The server validates hard, so these are the
// only place field names are spelled.

export function selectTarget(view: string, variant: string): object {
    return { type: "select_target", view, variant };
}

export function virtualProbe(yaw: number, pitch: number, roll: number,
                             contacts: Contacts): object {
    return { type: "virtual_probe", yaw, pitch, roll, contacts };
}

export function startCalibration(): object {
    return { type: "start_calibration" };
}

export function resetAttempt(): object {
    return { type: "reset_attempt" };
}

export function quizAnswer(itemId: string, choice: number): object {
    return { type: "quiz_answer", item_id: itemId, choice };
}
