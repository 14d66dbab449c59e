import { dragToBox } from "./geometry.js";
import {
  emptyState,
  type CategoryId,
  type ConstraintBox,
  type EditorState,
  type Proposal,
} from "./types.js";

function cloneConstraints(constraints: ConstraintBox[]): ConstraintBox[] {
  return constraints.map((c) => ({ category: c.category, box: [...c.box] as ConstraintBox["box"] }));
}

/**
 * Editor store: wraps the current state plus an undo stack of constraint
 * snapshots. All mutations go through methods so every change that edits
 * constraints records history first; anything that fails must leave the
 * state exactly as it was.
 */
export class EditorStore {
  state: EditorState = emptyState();
  private history: ConstraintBox[][] = [];
  private listeners: Array<() => void> = [];

  subscribe(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  private pushHistory(): void {
    this.history.push(cloneConstraints(this.state.constraints));
    if (this.history.length > 100) this.history.shift();
  }

  get canUndo(): boolean {
    return this.history.length > 0;
  }

  loadImage(name: string, width: number, height: number): void {
    this.state = {
      ...emptyState(),
      imageName: name,
      canvasW: width,
      canvasH: height,
    };
    this.history = [];
    this.emit();
  }

  /** Adds a constraint from a drag gesture; degenerate drags are ignored. */
  addDrag(category: CategoryId, x0: number, y0: number, x1: number, y1: number): boolean {
    const box = dragToBox(x0, y0, x1, y1, this.state.canvasW, this.state.canvasH);
    if (box === null) return false;
    this.pushHistory();
    this.state = {
      ...this.state,
      constraints: [...this.state.constraints, { category, box }],
    };
    this.emit();
    return true;
  }

  addConstraint(c: ConstraintBox): void {
    this.pushHistory();
    this.state = { ...this.state, constraints: [...this.state.constraints, c] };
    this.emit();
  }

  removeConstraint(index: number): void {
    if (index < 0 || index >= this.state.constraints.length) return;
    this.pushHistory();
    this.state = {
      ...this.state,
      constraints: this.state.constraints.filter((_, i) => i !== index),
    };
    this.emit();
  }

  clearConstraints(): void {
    if (this.state.constraints.length === 0) return;
    this.pushHistory();
    this.state = { ...this.state, constraints: [] };
    this.emit();
  }

  undo(): void {
    const prev = this.history.pop();
    if (prev === undefined) return;
    this.state = { ...this.state, constraints: prev };
    this.emit();
  }

  setProposals(proposals: Proposal[], weightsVersion: string | null): void {
    this.state = {
      ...this.state,
      proposals,
      selected: proposals.length > 0 ? 0 : null,
      weightsVersion,
    };
    this.emit();
  }

  selectProposal(index: number | null): void {
    if (index !== null && (index < 0 || index >= this.state.proposals.length)) return;
    this.state = { ...this.state, selected: index };
    this.emit();
  }

  /**
   * Loads the selected proposal's elements as editable constraint boxes —
   * the iterate step: tweak what came back, then generate again.
   */
  adoptSelected(): boolean {
    const { selected, proposals } = this.state;
    if (selected === null || proposals[selected] === undefined) return false;
    this.pushHistory();
    this.state = {
      ...this.state,
      constraints: proposals[selected].layout.elements.map((e) => ({
        category: e.category,
        box: [...e.box] as ConstraintBox["box"],
      })),
    };
    this.emit();
    return true;
  }

  /** Restores a previously saved state (e.g. from local storage). */
  restore(state: EditorState): void {
    this.state = state;
    this.history = [];
    this.emit();
  }
}
