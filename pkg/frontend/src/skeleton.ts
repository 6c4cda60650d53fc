/** Stick-figure rendering of the arm from streamed joint origins. */

export interface Segment {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

/** Orthographic projection (x right, z up) scaled into a view box. */
export function projectSkeleton(
  joints: number[][],
  width: number,
  height: number,
  reachM = 0.65,
): Segment[] {
  const scale = Math.min(width, height) / (2 * reachM);
  const cx = width / 2;
  const cy = height * 0.8; // base near the bottom
  const px = (p: number[]) => cx + p[0] * scale;
  const py = (p: number[]) => cy - p[2] * scale;
  const segments: Segment[] = [];
  for (let i = 1; i < joints.length; i++) {
    segments.push({
      x1: px(joints[i - 1]),
      y1: py(joints[i - 1]),
      x2: px(joints[i]),
      y2: py(joints[i]),
    });
  }
  return segments;
}

export function drawSkeleton(
  ctx: CanvasRenderingContext2D,
  joints: number[][],
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const segments = projectSkeleton(joints, width, height);
  ctx.lineWidth = 4;
  ctx.lineCap = "round";
  ctx.strokeStyle = "#4fd1c5";
  for (const seg of segments) {
    ctx.beginPath();
    ctx.moveTo(seg.x1, seg.y1);
    ctx.lineTo(seg.x2, seg.y2);
    ctx.stroke();
  }
  ctx.fillStyle = "#e6edf3";
  for (const joint of joints) {
    const segmentsScale = Math.min(width, height) / (2 * 0.65);
    const x = width / 2 + joint[0] * segmentsScale;
    const y = height * 0.8 - joint[2] * segmentsScale;
    ctx.beginPath();
    ctx.arc(x, y, 5, 0, Math.PI * 2);
    ctx.fill();
  }
}
