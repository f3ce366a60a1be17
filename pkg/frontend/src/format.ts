/** Number formatting: every rendered numeral must come through here from a
 * response field, never from arithmetic invented in the view layer. */

export function fmt3(value: number): string {
  return value.toFixed(3);
}

export function pct(fraction: number): string {
  return `${Math.round(fraction * 100)}%`;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
