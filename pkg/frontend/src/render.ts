/** Split report text into renderable segments from stored spans.
 *
 * Pure text math, no DOM: the UI maps each segment to a <span> element, so
 * highlights always sit at exactly the stored character offsets. Overlapping
 * highlights (an error span over a word tag) split at every boundary and
 * stack their classes.
 */

export interface Highlight {
  start: number;
  end: number;
  cssClass: string;
  title?: string;
}

export interface Segment {
  start: number;
  end: number;
  text: string;
  classes: string[];
  titles: string[];
}

export function segmentText(text: string, highlights: Highlight[]): Segment[] {
  const boundaries = new Set<number>([0, text.length]);
  for (const highlight of highlights) {
    boundaries.add(Math.max(0, Math.min(highlight.start, text.length)));
    boundaries.add(Math.max(0, Math.min(highlight.end, text.length)));
  }
  const points = [...boundaries].sort((a, b) => a - b);
  const segments: Segment[] = [];
  for (let index = 0; index < points.length - 1; index += 1) {
    const start = points[index];
    const end = points[index + 1];
    if (start === end) {
      continue;
    }
    const active = highlights.filter((h) => h.start <= start && end <= h.end);
    segments.push({
      start,
      end,
      text: text.slice(start, end),
      classes: active.map((h) => h.cssClass),
      titles: active.flatMap((h) => (h.title ? [h.title] : [])),
    });
  }
  return segments;
}

/** Line offsets of SOAP section starts, for visual separation of sections. */
export function sectionBreaks(text: string): number[] {
  const breaks: number[] = [];
  const pattern = /^(S|O|A|P|Subjective|Objective|Assessment|Plan|Subjectief|Objectief|Evaluatie):/im;
  let offset = 0;
  for (const line of text.split("\n")) {
    if (pattern.test(line)) {
      breaks.push(offset);
    }
    offset += line.length + 1;
  }
  return breaks;
}
