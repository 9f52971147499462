/**
 * Parameter form model, derived from a plugin manifest.
 *
 * The mapping is a pure function of the manifest's param specs:
 * enum -> dropdown, bool -> checkbox, int and string -> text input with a
 * client-side kind check. Submission stays disabled until every required
 * field holds a valid value.
 */

import type { ParamSpec } from "./api";

export type FieldControl = "dropdown" | "checkbox" | "text";

export interface FormField {
  name: string;
  control: FieldControl;
  kind: ParamSpec["kind"];
  required: boolean;
  options?: string[];
  initial: string;
}

export interface FieldState {
  raw: string;
  touched: boolean;
}

export type FormValues = Record<string, FieldState>;

export function fieldsFor(params: ParamSpec[]): FormField[] {
  return params.map((spec) => {
    const field: FormField = {
      name: spec.name,
      control:
        spec.kind === "enum"
          ? "dropdown"
          : spec.kind === "bool"
            ? "checkbox"
            : "text",
      kind: spec.kind,
      required: spec.required,
      initial: spec.default === undefined ? "" : String(spec.default),
    };
    if (spec.kind === "enum") {
      field.options = [...(spec.choices ?? [])];
    }
    return field;
  });
}

export function initialValues(fields: FormField[]): FormValues {
  const values: FormValues = {};
  for (const field of fields) {
    values[field.name] = { raw: field.initial, touched: false };
  }
  return values;
}

/** Error message for one field value, or null when it is acceptable. */
export function fieldError(field: FormField, raw: string): string | null {
  if (raw === "") {
    return field.required ? "required" : null;
  }
  switch (field.kind) {
    case "int":
      return /^-?\d+$/.test(raw) ? null : "must be an integer";
    case "bool":
      return raw === "true" || raw === "false" ? null : "must be true or false";
    case "enum":
      return (field.options ?? []).includes(raw)
        ? null
        : "not one of the allowed choices";
    case "string":
      return null;
  }
}

export function canSubmit(fields: FormField[], values: FormValues): boolean {
  return fields.every(
    (field) => fieldError(field, values[field.name]?.raw ?? "") === null,
  );
}

/**
 * Typed request params from the raw field values. Fields left empty are
 * omitted so the server fills declared defaults itself.
 */
export function collectParams(
  fields: FormField[],
  values: FormValues,
): Record<string, unknown> {
  const params: Record<string, unknown> = {};
  for (const field of fields) {
    const raw = values[field.name]?.raw ?? "";
    if (raw === "") {
      continue;
    }
    if (field.kind === "int") {
      params[field.name] = parseInt(raw, 10);
    } else if (field.kind === "bool") {
      params[field.name] = raw === "true";
    } else {
      params[field.name] = raw;
    }
  }
  return params;
}
