/** three.js scene: translucent vessel, stent wires, uncertainty overlay. */

import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";
import type { SessionState } from "./state";

/** Blue-to-red ramp for the per-node standard-deviation overlay. */
function rampColor(t: number, out: THREE.Color): THREE.Color {
  return out.setHSL(0.66 * (1 - Math.min(Math.max(t, 0), 1)), 1.0, 0.5);
}

export class Viewer {
  private renderer: THREE.WebGLRenderer;
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private controls: OrbitControls;

  private vessel: THREE.Mesh | null = null;
  private centerline: THREE.Line | null = null;
  private stent: THREE.LineSegments | null = null;
  private ghosts: THREE.Group = new THREE.Group();
  private beamIndex: number[] = [];

  constructor(canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.scene.background = new THREE.Color(0x10141c);
    this.camera = new THREE.PerspectiveCamera(40, 1, 0.1, 1000);
    this.camera.position.set(40, 25, 60);
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.target.set(0, 2, 60);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.6));
    const key = new THREE.DirectionalLight(0xffffff, 1.2);
    key.position.set(1, 2, 1);
    this.scene.add(key);
    this.scene.add(this.ghosts);
    this.resize();
    window.addEventListener("resize", () => this.resize());
    this.renderer.setAnimationLoop(() => {
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
    });
  }

  private resize(): void {
    const el = this.renderer.domElement;
    const w = el.clientWidth || el.parentElement?.clientWidth || 800;
    const h = el.clientHeight || el.parentElement?.clientHeight || 600;
    this.renderer.setSize(w, h, false);
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
  }

  /** Rebuild scene objects from the session state. */
  update(state: SessionState): void {
    if (state.info && this.beamIndex.length === 0) {
      this.beamIndex = state.info.stent.beams;
    }
    if (state.vessel) this.setVessel(state.vessel.vertices, state.vessel.triangles, state.vessel.centerline);
    this.setStent(state);
    this.setGhosts(state);
  }

  private setVessel(vertices: number[], triangles: number[], centerline: number[]): void {
    if (this.vessel) {
      this.scene.remove(this.vessel);
      this.vessel.geometry.dispose();
    }
    if (this.centerline) {
      this.scene.remove(this.centerline);
      this.centerline.geometry.dispose();
    }
    const geo = new THREE.BufferGeometry();
    geo.setAttribute("position", new THREE.Float32BufferAttribute(vertices, 3));
    geo.setIndex(triangles);
    geo.computeVertexNormals();
    const mat = new THREE.MeshPhongMaterial({
      color: 0xc05050,
      transparent: true,
      opacity: 0.25,
      side: THREE.DoubleSide,
      depthWrite: false,
    });
    this.vessel = new THREE.Mesh(geo, mat);
    this.scene.add(this.vessel);

    const cgeo = new THREE.BufferGeometry();
    cgeo.setAttribute("position", new THREE.Float32BufferAttribute(centerline, 3));
    this.centerline = new THREE.Line(cgeo, new THREE.LineBasicMaterial({ color: 0x667788 }));
    this.scene.add(this.centerline);

    const mid = Math.floor(centerline.length / 6) * 3;
    this.controls.target.set(centerline[mid], centerline[mid + 1], centerline[mid + 2]);
  }

  private setStent(state: SessionState): void {
    if (this.stent) {
      this.scene.remove(this.stent);
      this.stent.geometry.dispose();
      this.stent = null;
    }
    const pred = state.prediction;
    if (!state.showDeployed || !pred?.nodes || this.beamIndex.length === 0) return;
    const geo = new THREE.BufferGeometry();
    geo.setAttribute("position", new THREE.Float32BufferAttribute(pred.nodes, 3));
    geo.setIndex(this.beamIndex);

    const n = pred.nodes.length / 3;
    const colors = new Float32Array(3 * n);
    const c = new THREE.Color();
    const std = state.options.uncertainty && pred.node_std ? pred.node_std : null;
    const stdMax = std ? Math.max(...std, 1e-12) : 1;
    for (let i = 0; i < n; i++) {
      if (std) rampColor(std[i] / stdMax, c);
      else c.setHex(0xd8dce4);
      colors[3 * i] = c.r;
      colors[3 * i + 1] = c.g;
      colors[3 * i + 2] = c.b;
    }
    geo.setAttribute("color", new THREE.BufferAttribute(colors, 3));
    const mat = new THREE.LineBasicMaterial({
      vertexColors: true,
      linewidth: state.options.magnification,
    });
    this.stent = new THREE.LineSegments(geo, mat);
    this.scene.add(this.stent);
  }

  private setGhosts(state: SessionState): void {
    for (const child of [...this.ghosts.children]) {
      this.ghosts.remove(child);
      (child as THREE.LineSegments).geometry.dispose();
    }
    if (!state.options.uncertainty || !state.showDeployed || this.beamIndex.length === 0) return;
    const mat = new THREE.LineBasicMaterial({ color: 0x66aaff, transparent: true, opacity: 0.12 });
    for (const nodes of state.ghosts) {
      const geo = new THREE.BufferGeometry();
      geo.setAttribute("position", new THREE.Float32BufferAttribute(nodes, 3));
      geo.setIndex(this.beamIndex);
      this.ghosts.add(new THREE.LineSegments(geo, mat));
    }
  }
}
