// Tree-first formula building for the calculation and selection windows.
// The palette composes nodes; the text view prints the canonical grammar the
// engine parses, so what the window shows is exactly what gets submitted.

export type ScalarOp = "add" | "subtract" | "multiply" | "divide";
export type AggregationOp = "sum" | "average" | "count" | "min" | "max";
export type DatePartOp = "month" | "quarter" | "year" | "day_label";
export type ComparisonOp = "equal" | "greater" | "less";
export type BooleanOp = "and" | "or" | "not";

export type FormulaNode =
  | { op: "ref"; class: string | null; attribute: string }
  | { op: "lit"; value: number | string | boolean | { date: string } }
  | { op: ScalarOp | ComparisonOp; left: FormulaNode; right: FormulaNode }
  | { op: AggregationOp | DatePartOp; operand: FormulaNode }
  | { op: "and" | "or"; operands: FormulaNode[] }
  | { op: "not"; operand: FormulaNode };

export const SCALAR_PALETTE: ScalarOp[] = ["add", "subtract", "multiply", "divide"];
export const AGGREGATION_PALETTE: AggregationOp[] = ["sum", "average", "count", "min", "max"];
export const COMPARISON_PALETTE: ComparisonOp[] = ["equal", "greater", "less"];
export const BOOLEAN_PALETTE: BooleanOp[] = ["and", "or", "not"];

export const ref = (cls: string | null, attribute: string): FormulaNode =>
  ({ op: "ref", class: cls, attribute });
export const lit = (value: number | string | boolean): FormulaNode =>
  ({ op: "lit", value });
export const dateLit = (iso: string): FormulaNode =>
  ({ op: "lit", value: { date: iso } });
export const binary = (op: ScalarOp | ComparisonOp, left: FormulaNode, right: FormulaNode): FormulaNode =>
  ({ op, left, right });
export const call = (op: AggregationOp | DatePartOp, operand: FormulaNode): FormulaNode =>
  ({ op, operand });
export const all = (...operands: FormulaNode[]): FormulaNode =>
  ({ op: "and", operands });
export const any = (...operands: FormulaNode[]): FormulaNode =>
  ({ op: "or", operands });
export const not = (operand: FormulaNode): FormulaNode => ({ op: "not", operand });

const SYMBOL: Record<string, string> = {
  add: "+", subtract: "-", multiply: "*", divide: "/",
  equal: "=", greater: ">", less: "<",
};

function isComposite(node: FormulaNode): boolean {
  return "left" in node || node.op === "and" || node.op === "or";
}

function isBooleanComposite(node: FormulaNode): boolean {
  return node.op === "and" || node.op === "or";
}

export function printFormula(node: FormulaNode): string {
  switch (node.op) {
    case "ref":
      if (node.class === null) return node.attribute;
      return `"${node.class}.${node.attribute}"`;
    case "lit": {
      const v = node.value;
      if (typeof v === "boolean") return v ? "true" : "false";
      if (typeof v === "number") return String(v);
      if (typeof v === "string") return `"${v}"`;
      return v.date;
    }
    case "and":
    case "or":
      return node.operands
        .map((child) => (isBooleanComposite(child)
          ? `(${printFormula(child)})`
          : printFormula(child)))
        .join(` ${node.op} `);
    case "not": {
      const inner = printFormula(node.operand);
      return isBooleanComposite(node.operand) ? `not (${inner})` : `not ${inner}`;
    }
    case "sum":
    case "average":
    case "count":
    case "min":
    case "max":
    case "month":
    case "quarter":
    case "year":
    case "day_label":
      return `${node.op}(${printFormula(node.operand)})`;
    default: {
      const lhs = printFormula(node.left);
      const rhs = printFormula(node.right);
      const left = isComposite(node.left) ? `(${lhs})` : lhs;
      const right = isComposite(node.right) ? `(${rhs})` : rhs;
      return `${left} ${SYMBOL[node.op]} ${right}`;
    }
  }
}

// Guard rails the window enforces before submitting (the engine re-checks).
export function localDiagnostics(node: FormulaNode): string[] {
  const problems: string[] = [];
  const walk = (n: FormulaNode): void => {
    if (n.op === "and" || n.op === "or") {
      if (n.operands.length < 2) problems.push(`${n.op} needs at least two operands`);
      n.operands.forEach(walk);
    } else if (n.op === "not") {
      walk(n.operand);
    } else if ("operand" in n) {
      if (["sum", "average", "count", "min", "max"].includes(n.op) && n.operand.op !== "ref") {
        problems.push(`${n.op} takes an attribute reference`);
      }
      walk(n.operand);
    } else if ("left" in n) {
      walk(n.left);
      walk(n.right);
    } else if (n.op === "lit" && typeof n.value === "string" && n.value.includes(".")) {
      problems.push("string literals cannot contain a dot");
    }
  };
  walk(node);
  return problems;
}
