/** Element categories, numbered to match the HTTP API and CLI renderer. */
export const CATEGORIES = {
  logo: 1,
  text: 2,
  underlay: 3,
  embellishment: 4,
} as const;

export type CategoryName = keyof typeof CATEGORIES;
export type CategoryId = (typeof CATEGORIES)[CategoryName];

export const CATEGORY_NAMES: Record<CategoryId, CategoryName> = {
  1: "logo",
  2: "text",
  3: "underlay",
  4: "embellishment",
};

/** Palette shared with the CLI's render command so overlays match. */
export const CATEGORY_COLORS: Record<CategoryId, string> = {
  1: "#e74c3c",
  2: "#3498db",
  3: "#2ecc71",
  4: "#f1c40f",
};

/** Normalized center-format box: [cx, cy, w, h], all in [0, 1]. */
export type NormBox = [number, number, number, number];

export interface ConstraintBox {
  category: CategoryId;
  box: NormBox;
}

/** Pixel-space rectangle on the editor canvas. */
export interface PixelRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface LayoutElement {
  category: CategoryId;
  box: NormBox;
}

export interface LayoutObj {
  width: number;
  height: number;
  elements: LayoutElement[];
}

export interface ProposalMetrics {
  r_com: number | null;
  r_sub: number | null;
  r_und: number | null;
}

export interface Proposal {
  layout: LayoutObj;
  metrics: ProposalMetrics;
  constraints_satisfied: boolean;
}

export interface GenerateResponse {
  proposals: Proposal[];
  model: { weights_version: string };
}

/** One annotation record, the same JSON object the CLI reads and writes. */
export interface AnnotationRecordObj {
  image_path: string;
  width: number;
  height: number;
  elements: LayoutElement[];
}

export interface EditorState {
  imageName: string | null;
  canvasW: number;
  canvasH: number;
  constraints: ConstraintBox[];
  proposals: Proposal[];
  selected: number | null;
  weightsVersion: string | null;
}

export function emptyState(): EditorState {
  return {
    imageName: null,
    canvasW: 0,
    canvasH: 0,
    constraints: [],
    proposals: [],
    selected: null,
    weightsVersion: null,
  };
}
