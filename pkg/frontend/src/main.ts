// Page wiring. Everything here is plumbing between DOM controls, the
// message channel, and UiState; the training decisions all happen on the
// server and arrive as state messages.

import { AssetLibrary, loadLibrary } from "./assets.js";
import { ReconnectingChannel } from "./channel.js";
import { ProbeControls, ProbeSender } from "./probe.js";
import { quizAnswer, resetAttempt, selectTarget, startCalibration } from "./protocol.js";
import { Viewport } from "./render.js";
import { UiState, applyMessage, clearToast, connectionChanged, initialState } from "./state.js";

interface QuizItemDoc {
    id: string;
    prompt: string;
    options: string[];
}

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing #${id}`);
    return node as T;
}

const barFill = el<HTMLDivElement>("bar-fill");
const barLabel = el<HTMLSpanElement>("bar-label");
const banner = el<HTMLDivElement>("banner");
const toast = el<HTMLDivElement>("toast");
const ticker = el<HTMLUListElement>("ticker");
const targetSelect = el<HTMLSelectElement>("target");
const yawDial = el<HTMLInputElement>("yaw");
const yawReadout = el<HTMLSpanElement>("yaw-readout");
const tiltSlider = el<HTMLInputElement>("tilt");
const tiltReadout = el<HTMLSpanElement>("tilt-readout");
const padRow = el<HTMLDivElement>("pads");
const controlsBox = el<HTMLFieldSetElement>("controls");
const resetBtn = el<HTMLButtonElement>("reset");
const calibrateBtn = el<HTMLButtonElement>("calibrate");
const calOverlay = el<HTMLDivElement>("calibration");
const quizBox = el<HTMLDivElement>("quiz");
const viewport = new Viewport(el<HTMLCanvasElement>("screen"));

let state: UiState = initialState();
let library: AssetLibrary | null = null;
let heldPad: number | null = null;
let toastTimer: ReturnType<typeof setTimeout> | null = null;
let renderQueued = false;

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const channel = new ReconnectingChannel(wsUrl, {
    onMessage: (m) => setState(applyMessage(state, m)),
    onStatus: (s) => setState(connectionChanged(state, s)),
});
const probe = new ProbeSender((doc) => channel.send(doc));

function setState(next: UiState): void {
    state = next;
    if (!renderQueued) {
        renderQueued = true;
        requestAnimationFrame(() => {
            renderQueued = false;
            render();
        });
    }
}

function render(): void {
    barFill.style.width = `${(state.bar / 3) * 100}%`;
    barLabel.textContent = `${state.bar}/3 Completion`;
    barFill.classList.toggle("done", state.completed);

    banner.hidden = state.connection === "open";
    banner.textContent = state.connection === "connecting"
        ? "connecting..." : "connection lost, retrying";

    ticker.replaceChildren(...state.ticker.map((e) => {
        const li = document.createElement("li");
        li.textContent = `${(e.t_ms / 1000).toFixed(1)} s  ${e.code}`;
        return li;
    }));

    if (state.toast && toastTimer === null) {
        toast.textContent = state.toast;
        toast.hidden = false;
        toastTimer = setTimeout(() => {
            toastTimer = null;
            toast.hidden = true;
            setState(clearToast(state));
        }, 2500);
    }

    if (state.target) {
        const want = `${state.target.view}:${state.target.variant}`;
        if (targetSelect.value !== want) targetSelect.value = want;
    }

    controlsBox.disabled = state.controlsDisabled;

    if (state.calibration && state.calibration.phase === "collecting") {
        calOverlay.hidden = false;
        calOverlay.textContent =
            `hold still: ${state.calibration.secondsRemaining.toFixed(1)} s`;
    } else if (state.calibration) {
        calOverlay.hidden = false;
        calOverlay.textContent = state.calibration.phase === "applied"
            ? "calibration applied"
            : `calibration failed: ${state.calibration.detail ?? ""}`;
        setTimeout(() => { calOverlay.hidden = true; }, 2000);
    }

    paint();
    renderQuizResult();
}

function paint(): void {
    if (state.slice) {
        viewport.show(state.slice.pixels, state.slice.width, state.slice.height);
        return;
    }
    if (state.frame && library) {
        const asset = library.assets.get(state.frame.key);
        if (asset) {
            const idx = state.frame.index % asset.frames.length;
            viewport.show(asset.frames[idx], asset.width, asset.height);
            return;
        }
    }
    viewport.blank();
}

function currentControls(): ProbeControls {
    return {
        yaw: Number(yawDial.value),
        tilt: Number(tiltSlider.value),
        roll: 0,
        contact: heldPad,
    };
}

function pushProbe(): void {
    yawReadout.textContent = `${yawDial.value}°`;
    tiltReadout.textContent = `${tiltSlider.value}°`;
    probe.update(currentControls());
}

function buildPads(): void {
    for (let i = 0; i < 5; i++) {
        const btn = document.createElement("button");
        btn.textContent = `pad ${i}`;
        btn.addEventListener("click", () => {
            heldPad = heldPad === i ? null : i;
            for (const [j, b] of Array.from(padRow.children).entries()) {
                b.classList.toggle("held", j === heldPad);
            }
            pushProbe();
        });
        padRow.appendChild(btn);
    }
}

function buildTargets(): void {
    if (!library) return;
    targetSelect.replaceChildren(...library.manifest.targets.map((t) => {
        const opt = document.createElement("option");
        opt.value = `${t.view}:${t.variant}`;
        opt.textContent = `${t.view} (${t.variant})`;
        return opt;
    }));
}

async function buildQuiz(): Promise<void> {
    const res = await fetch("/quiz.json");
    if (!res.ok) return;
    const doc = await res.json() as { items: QuizItemDoc[] };
    quizBox.replaceChildren(...doc.items.map((item) => {
        const wrap = document.createElement("div");
        wrap.className = "quiz-item";
        wrap.dataset.itemId = item.id;
        const q = document.createElement("p");
        q.textContent = item.prompt;
        wrap.appendChild(q);
        for (const [idx, option] of item.options.entries()) {
            const btn = document.createElement("button");
            btn.textContent = option;
            btn.addEventListener("click", () => channel.send(quizAnswer(item.id, idx)));
            wrap.appendChild(btn);
        }
        const verdict = document.createElement("p");
        verdict.className = "verdict";
        wrap.appendChild(verdict);
        return wrap;
    }));
}

function renderQuizResult(): void {
    if (!state.quiz) return;
    const wrap = quizBox.querySelector<HTMLDivElement>(
        `[data-item-id="${state.quiz.itemId}"]`);
    if (!wrap) return;
    const verdict = wrap.querySelector<HTMLParagraphElement>(".verdict");
    if (verdict) {
        verdict.textContent = (state.quiz.correct ? "correct. " : "not quite. ")
            + state.quiz.explanation;
        verdict.classList.toggle("good", state.quiz.correct);
    }
}

targetSelect.addEventListener("change", () => {
    const [view, variant] = targetSelect.value.split(":");
    channel.send(selectTarget(view, variant));
});
yawDial.addEventListener("input", pushProbe);
tiltSlider.addEventListener("input", pushProbe);
resetBtn.addEventListener("click", () => channel.send(resetAttempt()));
calibrateBtn.addEventListener("click", () => channel.send(startCalibration()));

buildPads();
loadLibrary("").then((lib) => {
    library = lib;
    buildTargets();
    render();
});
buildQuiz();
channel.connect();
