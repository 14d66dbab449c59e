import { ApiError, isAbort, ServiceClient } from "./api.js";
import { exportRecord, importRecord } from "./annotation.js";
import { clampBox } from "./geometry.js";
import { drawConstraints, drawProposal, drawRubberBand } from "./render.js";
import { EditorStore } from "./state.js";
import { loadSession, saveSession } from "./storage.js";
import {
  CATEGORIES,
  CATEGORY_COLORS,
  type CategoryId,
  type CategoryName,
} from "./types.js";

const store = new EditorStore();
let client = new ServiceClient("http://127.0.0.1:8000");
let imageBlob: Blob | null = null;
let imageBitmap: ImageBitmap | null = null;
let imageDataUrl: string | null = null;
let activeCategory: CategoryId = CATEGORIES.text;
let drag: { x0: number; y0: number; x1: number; y1: number } | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("editor-canvas");
const ctx = canvas.getContext("2d")!;
const proposalList = el<HTMLDivElement>("proposal-list");
const toastBox = el<HTMLDivElement>("toasts");
const healthBadge = el<HTMLSpanElement>("health");
const generateBtn = el<HTMLButtonElement>("generate");
const exportBtn = el<HTMLButtonElement>("export");
const adoptBtn = el<HTMLButtonElement>("adopt");
const undoBtn = el<HTMLButtonElement>("undo");

function toast(message: string, kind: "error" | "info" = "error"): void {
  const node = document.createElement("div");
  node.className = `toast ${kind}`;
  node.textContent = message;
  toastBox.appendChild(node);
  setTimeout(() => node.remove(), 6000);
}

async function refreshHealth(): Promise<void> {
  try {
    const h = await client.health();
    healthBadge.textContent = `up · ${h.weights_version}`;
    healthBadge.className = "badge ok";
  } catch (err) {
    healthBadge.textContent = err instanceof ApiError ? `down (${err.status})` : "down";
    healthBadge.className = "badge bad";
  }
}

function redraw(): void {
  const { canvasW, canvasH, constraints, proposals, selected } = store.state;
  if (canvasW === 0 || canvasH === 0) return;
  canvas.width = canvasW;
  canvas.height = canvasH;
  if (imageBitmap !== null) {
    ctx.drawImage(imageBitmap, 0, 0, canvasW, canvasH);
  } else {
    ctx.fillStyle = "#2a2e35";
    ctx.fillRect(0, 0, canvasW, canvasH);
  }
  if (selected !== null && proposals[selected] !== undefined) {
    drawProposal(ctx, proposals[selected].layout.elements, canvasW, canvasH);
  }
  drawConstraints(ctx, constraints, canvasW, canvasH);
  if (drag !== null) {
    drawRubberBand(ctx, drag.x0, drag.y0, drag.x1, drag.y1, CATEGORY_COLORS[activeCategory]);
  }
}

function fmt(v: number | null): string {
  return v === null ? "—" : v.toFixed(4);
}

function renderProposals(): void {
  const { proposals, selected } = store.state;
  proposalList.replaceChildren();
  proposals.forEach((p, i) => {
    const item = document.createElement("div");
    item.className = `proposal${i === selected ? " selected" : ""}`;
    const m = p.metrics;
    item.innerHTML = `
      <div class="proposal-title">#${i + 1} · ${p.layout.elements.length} elements
        ${p.constraints_satisfied ? "" : '<span class="warn">constraint missed</span>'}</div>
      <table class="metrics">
        <tr><td>readability</td><td>${fmt(m.r_com)}</td></tr>
        <tr><td>subject cover</td><td>${fmt(m.r_sub)}</td></tr>
        <tr><td>underlay use</td><td>${fmt(m.r_und)}</td></tr>
      </table>`;
    item.addEventListener("click", () => store.selectProposal(i));
    proposalList.appendChild(item);
  });
}

function syncButtons(): void {
  const hasImage = store.state.canvasW > 0;
  const hasSelection =
    store.state.selected !== null &&
    store.state.proposals[store.state.selected] !== undefined;
  generateBtn.disabled = !hasImage || imageBlob === null;
  exportBtn.disabled = !hasSelection;
  adoptBtn.disabled = !hasSelection;
  undoBtn.disabled = !store.canUndo;
}

function persist(): void {
  saveSession({
    state: store.state,
    imageDataUrl,
    apiBase: client.baseUrl,
  });
}

store.subscribe(() => {
  redraw();
  renderProposals();
  syncButtons();
  persist();
});

// --- canvas interaction ------------------------------------------------------

function canvasPoint(ev: MouseEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * canvas.width,
    y: ((ev.clientY - rect.top) / rect.height) * canvas.height,
  };
}

canvas.addEventListener("mousedown", (ev) => {
  if (store.state.canvasW === 0) return;
  const p = canvasPoint(ev);
  drag = { x0: p.x, y0: p.y, x1: p.x, y1: p.y };
});

canvas.addEventListener("mousemove", (ev) => {
  if (drag === null) return;
  const p = canvasPoint(ev);
  drag.x1 = p.x;
  drag.y1 = p.y;
  redraw();
});

window.addEventListener("mouseup", () => {
  if (drag === null) return;
  const { x0, y0, x1, y1 } = drag;
  drag = null;
  store.addDrag(activeCategory, x0, y0, x1, y1) || redraw();
});

// --- controls ----------------------------------------------------------------

for (const name of Object.keys(CATEGORIES) as CategoryName[]) {
  const btn = el<HTMLButtonElement>(`cat-${name}`);
  btn.style.setProperty("--cat-color", CATEGORY_COLORS[CATEGORIES[name]]);
  btn.addEventListener("click", () => {
    activeCategory = CATEGORIES[name];
    document
      .querySelectorAll(".palette button")
      .forEach((b) => b.classList.toggle("active", b === btn));
  });
}

el<HTMLInputElement>("image-file").addEventListener("change", async (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (file === undefined) return;
  try {
    imageBitmap = await createImageBitmap(file);
  } catch {
    toast("could not decode that image");
    return;
  }
  imageBlob = file;
  imageDataUrl = await new Promise((resolve) => {
    const reader = new FileReader();
    reader.onload = () => resolve(String(reader.result));
    reader.onerror = () => resolve(null);
    reader.readAsDataURL(file);
  });
  store.loadImage(file.name, imageBitmap.width, imageBitmap.height);
});

undoBtn.addEventListener("click", () => store.undo());
el<HTMLButtonElement>("clear").addEventListener("click", () => store.clearConstraints());
adoptBtn.addEventListener("click", () => store.adoptSelected());

el<HTMLInputElement>("api-base").addEventListener("change", (ev) => {
  client = new ServiceClient((ev.target as HTMLInputElement).value);
  persist();
  void refreshHealth();
});

generateBtn.addEventListener("click", async () => {
  if (imageBlob === null || store.state.imageName === null) return;
  const nProposals = Number(el<HTMLInputElement>("n-proposals").value) || 4;
  const seed = Number(el<HTMLInputElement>("seed").value) || 0;
  generateBtn.classList.add("busy");
  try {
    const res = await client.generate(imageBlob, store.state.imageName, store.state.constraints, {
      nProposals,
      seed,
    });
    store.setProposals(res.proposals, res.model.weights_version);
    if (res.proposals.every((p) => p.layout.elements.length === 0)) {
      toast("model returned empty layouts — try a lower threshold or more training", "info");
    }
  } catch (err) {
    if (isAbort(err)) return;
    toast(err instanceof ApiError ? `server: ${err.message}` : `request failed: ${String(err)}`);
  } finally {
    generateBtn.classList.remove("busy");
  }
});

exportBtn.addEventListener("click", () => {
  const { selected, proposals, imageName, canvasW, canvasH } = store.state;
  if (selected === null || proposals[selected] === undefined) return;
  const json = exportRecord({
    image_path: imageName ?? "layout.png",
    width: canvasW,
    height: canvasH,
    elements: proposals[selected].layout.elements,
  });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(new Blob([json + "\n"], { type: "application/json" }));
  a.download = (imageName ?? "layout").replace(/\.[^.]+$/, "") + ".layout.json";
  a.click();
  URL.revokeObjectURL(a.href);
});

el<HTMLInputElement>("import-file").addEventListener("change", async (ev) => {
  const input = ev.target as HTMLInputElement;
  const file = input.files?.[0];
  input.value = "";
  if (file === undefined) return;
  try {
    const record = importRecord(await file.text());
    if (store.state.canvasW === 0) {
      store.loadImage(record.image_path, record.width, record.height);
    }
    for (const e of record.elements) {
      store.addConstraint({ category: e.category, box: clampBox(e.box) });
    }
    toast(`imported ${record.elements.length} boxes`, "info");
  } catch (err) {
    toast(`import failed: ${err instanceof Error ? err.message : String(err)}`);
  }
});

// --- boot --------------------------------------------------------------------

const saved = loadSession();
if (saved !== null) {
  client = new ServiceClient(saved.apiBase || client.baseUrl);
  el<HTMLInputElement>("api-base").value = client.baseUrl;
  if (saved.imageDataUrl !== null) {
    void fetch(saved.imageDataUrl)
      .then((r) => r.blob())
      .then(async (blob) => {
        imageBlob = blob;
        imageDataUrl = saved.imageDataUrl;
        imageBitmap = await createImageBitmap(blob);
        store.restore(saved.state);
      })
      .catch(() => store.restore(saved.state));
  } else {
    store.restore(saved.state);
  }
} else {
  el<HTMLInputElement>("api-base").value = client.baseUrl;
}
void refreshHealth();
